#include <iostream>
#include <map>
#include <memory>
#include <string>

#include "CLI11.hpp"

#include "qrfs/cli.hpp"

namespace {

// exit codes: 0 ok, 2 bad input or usage, 3 io, 4 numerical/algorithmic, 1 anything else
int exit_code_for(const qrfs::error& e) {
  const std::string k = e.kind();
  if (k == "validation" || k == "capacity") return 2;
  if (k == "io") return 3;
  return 4;
}

struct Sub {
  CLI::App* app = nullptr;
  std::map<std::string, std::string> text;
  std::map<std::string, bool> flags;
  std::string config;
};

void add_settings(Sub& sub, const std::string& command) {
  sub.app->add_option("--config", sub.config, "key=value config file (CLI flags override it)");
  for (const auto& d : qrfs::setting_table()) {
    if (!qrfs::setting_applies(d, command)) continue;
    std::string flag = d.key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const std::string help = d.help + (d.fallback.empty() ? "" : " [" + d.fallback + "]");
    if (d.type == qrfs::SettingType::flag)
      sub.app->add_flag("--" + flag, sub.flags[d.key], help);
    else
      sub.app->add_option("--" + flag, sub.text[d.key], help);
  }
}

qrfs::Settings collect(const Sub& sub, const std::string& command) {
  qrfs::Settings s(command);
  if (!sub.config.empty()) s.merge_file(qrfs::load_config_file(sub.config));
  for (const auto& [key, value] : sub.text) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (sub.app->count("--" + flag)) s.set(key, value);
  }
  for (const auto& [key, value] : sub.flags) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (sub.app->count("--" + flag)) s.set(key, value ? "true" : "false");
  }
  return s;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"qrfs: QR-based feature selection (strong RRQR, NMF-QR, QR-GA)"};
  app.set_version_flag("--version", QRFS_VERSION);
  app.require_subcommand(1);

  const std::map<std::string, std::string> about = {
      {"select", "select features with rrqr, nmfqr or qr-ga"},
      {"evaluate", "cross-validate a fixed feature list or an in-fold selector"},
      {"f-sweep", "strong RRQR selection and accuracy over a grid of f"},
      {"factorize", "strong RRQR factorization summary"},
  };
  std::map<std::string, std::unique_ptr<Sub>> subs;
  for (const auto& [name, text] : about) {
    auto sub = std::make_unique<Sub>();
    sub->app = app.add_subcommand(name, text);
    add_settings(*sub, name);
    subs[name] = std::move(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->app->parsed()) command = name;

  try {
    const auto settings = collect(*subs.at(command), command);
    const auto report = qrfs::run_command(settings);
    qrfs::emit_report(report, settings.text("out"), settings.text("format"));
  } catch (const qrfs::error& e) {
    std::cerr << qrfs::error_json(e).dump(2) << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << qrfs::error_json(e).dump(2) << "\n";
    return 1;
  }
  return 0;
}
