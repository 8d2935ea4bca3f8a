#include "cli_error.hpp"
#include "commands.hpp"
#include "config.hpp"

#include "c2st/c2st.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace {

using c2st::cli::CliError;

struct Flag {
  const char* name;
  const char* key;
  const char* help;
};

// Shorthand flags per subcommand; each one is a `--set key=value`.
const std::vector<std::pair<std::string, std::vector<Flag>>>& command_flags() {
  static const std::vector<std::pair<std::string, std::vector<Flag>>> table{
      {"gen", {{"--family", "data.family", "density pair"}, {"--delta", "data.delta", "pair parameter"},
               {"--n", "gen.n", "rows per sample"}}},
      {"train", {{"--family", "data.family", "density pair"}, {"--delta", "data.delta", "pair parameter"},
                 {"--x", "train.x", "X sample CSV"}, {"--y", "train.y", "Y sample CSV"},
                 {"--epochs", "training.epochs", "training epochs"}}},
      {"test", {{"--method", "test.method", "net-logit, net-acc or gmmd"}, {"--scores", "test.scores", "score CSV"},
                {"--x", "test.x", "X sample CSV"}, {"--y", "test.y", "Y sample CSV"},
                {"--model", "test.model", "trained model file"}, {"--family", "data.family", "density pair"},
                {"--delta", "data.delta", "pair parameter"}}},
      {"power", {{"--family", "data.family", "density pair"}, {"--delta", "data.delta", "pair parameter"},
                 {"--methods", "methods", "comma-separated methods"}, {"--n-run", "harness.n_run", "runs per replica"},
                 {"--n-rep", "harness.n_rep", "replicas"}}},
      {"loss-curve", {{"--example", "loss_curve.example", "mixture example"},
                      {"--delta", "loss_curve.delta", "pair parameter"}}},
      {"witness", {{"--family", "data.family", "density pair"}, {"--delta", "data.delta", "pair parameter"},
                   {"--model", "witness.model", "trained model file"}}},
      {"manifold-approx", {{"--manifold", "manifold.manifold", "circle, curve or sphere"},
                           {"--target", "manifold.target", "cos-theta or wave"},
                           {"--kmax", "manifold.k_max", "comma-separated polynomial degrees"},
                           {"--delta", "manifold.delta", "chart radius"}}},
  };
  return table;
}

struct Invocation {
  std::string config;
  std::string profile;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;  // config key -> raw value
};

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) c2st::cli::raise(C2ST_ERR_IO, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) c2st::cli::raise(C2ST_ERR_IO, "write to '" + path.string() + "' failed");
}

c2st::cli::RunConfig resolve(const Invocation& inv) {
  c2st::cli::ConfigSources src{inv.config, inv.profile, {}};
  for (const auto& [key, value] : inv.flags) src.overrides.push_back(key + "=" + value);
  src.overrides.insert(src.overrides.end(), inv.sets.begin(), inv.sets.end());
  if (!inv.out.empty()) src.overrides.push_back("output_dir=" + inv.out);
  if (inv.seed) src.overrides.push_back("seed=" + std::to_string(*inv.seed));
  return c2st::cli::load_config(src);
}

int report(c2st_status status, const std::string& message) {
  const nlohmann::json doc{
      {"error", {{"status", c2st_status_name(status)}, {"code", static_cast<int>(status)}, {"message", message}}}};
  std::cerr << doc.dump() << "\n";
  return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classifier two-sample tests, witness diagnostics and manifold network construction"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(c2st_version()));

  std::map<std::string, Invocation> invocations;
  auto add_common = [](CLI::App* sub, Invocation& inv) {
    sub->add_option("--config", inv.config, "JSON run configuration");
    sub->add_option("--profile", inv.profile, "named profile the configuration starts from");
    sub->add_option("--out", inv.out, "output directory");
    sub->add_option("--seed", inv.seed, "master seed");
    sub->add_option("--set", inv.sets, "override as key=value, e.g. harness.n_rep=5");
  };

  for (const auto& [name, flags] : command_flags()) {
    Invocation& inv = invocations[name];
    CLI::App* sub = app.add_subcommand(name);
    add_common(sub, inv);
    for (const auto& f : flags) {
      sub->add_option_function<std::string>(
          f.name, [&inv, key = std::string(f.key)](const std::string& v) { inv.flags[key] = v; }, f.help);
    }
  }
  Invocation& show = invocations["config"];
  CLI::App* show_cmd = app.add_subcommand("config", "print the effective configuration and exit");
  add_common(show_cmd, show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(C2ST_ERR_INVALID_INPUT, e.what());
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const c2st::cli::RunConfig cfg = resolve(invocations.at(command));
    if (command == "config") {
      std::cout << c2st::cli::emit_config(cfg);
      return 0;
    }
    const auto artifacts = c2st::cli::run_command(command, cfg);
    const std::filesystem::path dir(cfg.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) c2st::cli::raise(C2ST_ERR_IO, "cannot create '" + dir.string() + "': " + ec.message());
    for (const auto& a : artifacts) {
      write_file(dir / a.name, a.content);
      std::cout << (dir / a.name).string() << "\n";
    }
    return 0;
  } catch (const CliError& e) {
    return report(e.status(), e.what());
  } catch (const std::exception& e) {
    return report(C2ST_ERR_INTERNAL, e.what());
  }
}
