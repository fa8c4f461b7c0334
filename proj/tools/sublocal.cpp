// sublocal: run locality checks on branch scenarios and write JSON reports.
//
// Exit status: 0 all asserted checks pass, 1 a check failed, 2 the config
// (or command line) is invalid, 3 a numerical precondition was violated.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "suites.hpp"

#ifndef SUBLOCAL_VERSION
#define SUBLOCAL_VERSION "dev"
#endif

namespace {

using namespace sublocal;
using namespace sublocal::cli;

constexpr int schema_version = 1;

enum Status { ok = 0, check_failure = 1, config_error = 2, precondition_error = 3 };

const char* status_name(int s) {
    switch (s) {
    case ok: return "ok";
    case check_failure: return "check-failure";
    case config_error: return "config-error";
    default: return "precondition-error";
    }
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// suites that need the branch tables
bool needs_tables(const std::string& s) {
    return s == "locality" || s == "factorization" || s == "group" || s == "entanglement";
}

const std::vector<std::string>& known_suites() {
    static const std::vector<std::string> names{"microcausality", "locality", "factorization", "group",
                                                "oracle", "entanglement", "trotter", "kernel"};
    return names;
}

CheckRecord run_suite(const std::string& name, const Context& ctx) {
    const auto start = std::chrono::steady_clock::now();
    CheckRecord rec = name == "microcausality" ? microcausality_suite(ctx)
                    : name == "locality"       ? locality_suite(ctx)
                    : name == "factorization"  ? factorization_suite(ctx)
                    : name == "group"          ? group_suite(ctx)
                    : name == "oracle"         ? oracle_suite(ctx)
                    : name == "entanglement"   ? entanglement_suite(ctx)
                    : name == "trotter"        ? trotter_suite(ctx)
                                               : kernel_suite(ctx, std::cout);
    rec.inputs_digest = fnv1a(ctx.config_digest + "|" + name);
    rec.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

struct Invocation {
    std::string command;
    std::string config_path;
    std::vector<std::string> suites;   ///< from --suite; empty means the command's default
    RunOptions opt;
    bool out_given = false;
};

int execute(const Invocation& inv) {
    json report;
    report["schema_version"] = schema_version;
    report["artifact_version"] = SUBLOCAL_VERSION;
    report["command"] = inv.command;
    report["generated_at"] = utc_now();

    Context ctx;
    ctx.opt = inv.opt;
    std::string report_name = inv.command + ".json";
    int status = ok;
    json checks = json::array();

    auto fail = [&](int code, const std::string& kind, const std::string& message, const std::string& key = {}) {
        status = code;
        json err{{"kind", kind}, {"message", message}};
        if (!key.empty()) err["key"] = key;
        report["error"] = std::move(err);
        std::cerr << "sublocal: " << kind << ": " << message;
        if (!key.empty() && message.find(key) == std::string::npos) std::cerr << " [" << key << ']';
        std::cerr << '\n';
    };

    try {
        if (!inv.config_path.empty()) {
            ctx.cfg = load_config(inv.config_path);
            ctx.has_config = true;
            ctx.config_digest = fnv1a(ctx.cfg.text);
            report_name = ctx.cfg.output.report;
            if (!inv.out_given && !ctx.cfg.output.directory.empty()) ctx.opt.out_dir = ctx.cfg.output.directory;
            report["config"] = {{"path", inv.config_path}, {"digest", ctx.config_digest}, {"echo", ctx.cfg.entries}};
        } else if (inv.command != "trotter-study") {
            throw ConfigError("--config", "this command needs a scenario file");
        }

        std::vector<std::string> suites = inv.suites;
        if (suites.empty()) {
            if (inv.command == "run-scenario") suites = ctx.cfg.checks.suites;
            if (suites.empty() && inv.command == "run-scenario") suites = {"locality", "factorization", "group"};
        }
        for (const auto& s : suites)
            if (std::find(known_suites().begin(), known_suites().end(), s) == known_suites().end())
                throw ConfigError("checks.suites", "unknown suite '" + s + "'");
        report["suites"] = suites;
        report["deterministic"] = ctx.opt.deterministic;
        report["strict"] = ctx.opt.strict;

        if (ctx.has_config) {
            ctx.grid = ctx.cfg.make_grid();
            ctx.scenario = ctx.cfg.scenario(ctx.grid);
            ctx.scenario.validate();
            const bool fields = std::any_of(suites.begin(), suites.end(), [](const std::string& s) {
                return needs_tables(s) || s == "oracle";
            });
            if (fields) ctx.spectra = compute_spectra(ctx.scenario);
            if (std::any_of(suites.begin(), suites.end(), needs_tables)) ctx.prepare_tables();
        }

        std::vector<CheckRecord> records;
        if (ctx.opt.deterministic || suites.size() < 2) {
            for (const auto& s : suites) records.push_back(run_suite(s, ctx));
        } else {
            std::vector<std::future<CheckRecord>> jobs;
            for (const auto& s : suites) jobs.push_back(std::async(std::launch::async, run_suite, s, std::cref(ctx)));
            for (auto& j : jobs) records.push_back(j.get());
        }
        for (const auto& r : records) {
            checks.push_back(r.to_json());
            std::cerr << (r.asserted ? (r.passed ? "PASS " : "FAIL ") : "INFO ") << r.name;
            for (const auto& n : r.notes) std::cerr << " (" << n << ')';
            std::cerr << '\n';
            if (r.asserted && !r.passed) status = check_failure;
        }
    } catch (const ConfigError& e) {
        fail(config_error, "config-error", e.what(), e.key());
    } catch (const PreconditionError& e) {
        fail(precondition_error, "precondition-error", e.what());
    } catch (const std::exception& e) {
        fail(precondition_error, "numerical-error", e.what());
    }

    report["checks"] = std::move(checks);
    report["status"] = status_name(status);
    report["exit_code"] = status;

    const std::string text = report.dump(2) + "\n";
    if (!ctx.opt.out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(ctx.opt.out_dir, ec);
        std::ofstream os(std::filesystem::path(ctx.opt.out_dir) / report_name);
        if (!os) {
            std::cerr << "sublocal: cannot write report into '" << ctx.opt.out_dir << "'\n";
            return status == ok ? config_error : status;
        }
        os << text;
    } else if (inv.command != "emit-kernel") {
        std::cout << text;
    }
    return status;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subsystem-locality checks for branch-superposed sources coupled to a scalar field"};
    app.set_version_flag("--version", SUBLOCAL_VERSION);
    app.require_subcommand(1);

    Invocation inv;
    std::string positional;
    app.add_option("--config", inv.config_path, "Scenario file")->check(CLI::ExistingFile);
    app.add_flag("--deterministic", inv.opt.deterministic, "Single-threaded, bit-stable run");
    app.add_flag("--strict", inv.opt.strict, "Treat boundary-margin and negative-control warnings as errors");
    app.add_option("--out", inv.opt.out_dir, "Output directory (default: $SUBLOCAL_OUT)");
    app.add_option("--suite", inv.suites, "Run only these suites (repeatable)");

    const std::map<std::string, std::pair<std::string, std::string>> commands{
        {"check-microcausality", {"microcausality", "Light-cone leakage of the discretized commutator"}},
        {"run-scenario", {"", "Run the suites listed in the scenario file"}},
        {"factorization-test", {"factorization", "Fock-space factorization and reconstruction"}},
        {"group-property-test", {"group", "Composition of sub-interval propagators"}},
        {"oracle-compare", {"oracle", "Expected field against a lattice solution"}},
        {"entanglement", {"entanglement", "Reduced qudit state and negativity"}},
        {"trotter-study", {"trotter", "Splitting residual of a two-mode toy model"}},
        {"emit-kernel", {"kernel", "Write the commutator light-cone map as CSV"}},
    };
    for (const auto& [name, info] : commands) {
        auto* sub = app.add_subcommand(name, info.second)->fallthrough();
        if (name == "run-scenario") sub->add_option("scenario", positional, "Scenario file")->check(CLI::ExistingFile);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : config_error;
    }

    inv.command = app.get_subcommands().front()->get_name();
    if (!positional.empty()) {
        if (!inv.config_path.empty() && inv.config_path != positional) {
            std::cerr << "sublocal: both a positional scenario and --config were given\n";
            return config_error;
        }
        inv.config_path = positional;
    }
    if (const std::string& fixed = commands.at(inv.command).first; !fixed.empty() && inv.suites.empty())
        inv.suites = {fixed};
    inv.out_given = !inv.opt.out_dir.empty();
    if (!inv.out_given)
        if (const char* env = std::getenv("SUBLOCAL_OUT"); env && *env) inv.opt.out_dir = env;
    return execute(inv);
}
