#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gfe/harness.hpp"
#include "gfe/verify.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> trials;
    std::optional<unsigned> workers;
    std::string out_dir;
    std::string profile = "quick";
};

void add_common_flags(CLI::App* cmd, CliOptions& opt, bool needs_config) {
    auto* cfg = cmd->add_option("--config", opt.config_path, "experiment config file");
    if (needs_config) cfg->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", opt.seed, "override the run seed");
    cmd->add_option("--trials", opt.trials, "override the trial count");
    cmd->add_option("--out", opt.out_dir, "directory for result records");
    cmd->add_option("--workers", opt.workers, "worker thread count");
    cmd->add_option("--profile", opt.profile, "verification profile")
        ->check(CLI::IsMember({"quick", "full"}));
}

int run_config_command(const std::string& family, const CliOptions& opt) {
    gfe::Config cfg = gfe::Config::from_file(opt.config_path);
    if (opt.seed) cfg.set("experiment", "seed", std::to_string(*opt.seed));
    if (opt.trials) cfg.set("experiment", "trials", std::to_string(*opt.trials));
    if (opt.workers) cfg.set("experiment", "workers", std::to_string(*opt.workers));

    const std::string kind = cfg.get_string("experiment", "kind");
    const char* actual = gfe::family_of(kind);
    if (actual == nullptr)
        throw gfe::ConfigError("config error: [experiment].kind: unknown kind \"" + kind + "\"");
    if (family != actual)
        throw gfe::ConfigError("config error: [experiment].kind: \"" + kind +
                               "\" belongs to the " + actual + " subcommand");

    const gfe::RunOutput out = gfe::run_experiment(cfg);
    std::fprintf(stderr, "%s seed=%llu wall=%.2fs\n", out.record.experiment.c_str(),
                 static_cast<unsigned long long>(out.record.seed), out.record.wall_seconds);
    if (opt.out_dir.empty()) {
        std::fputs(gfe::to_json_text(out.record).c_str(), stdout);
    } else {
        for (const std::string& path : gfe::write_outputs(out, opt.out_dir))
            std::printf("%s\n", path.c_str());
    }
    return 0;
}

int run_verify(const CliOptions& opt) {
    const unsigned workers = opt.workers.value_or(1);
    const std::uint64_t seed = opt.seed.value_or(20260815ull);
    const gfe::SuiteReport rep = gfe::verify_all(opt.profile, workers, seed);
    for (const gfe::CriterionResult& c : rep.criteria)
        std::printf("criterion %2d/12  %s  %-28s (%.1fs/%.0fs)  %s\n", c.number,
                    c.pass ? "PASS" : "FAIL", c.name.c_str(), c.seconds, c.limit_seconds,
                    c.detail.c_str());
    int passed = 0;
    for (const gfe::CriterionResult& c : rep.criteria) passed += c.pass ? 1 : 0;
    std::printf("acceptance: %d/%zu passed (%s profile, %.1fs)\n", passed, rep.criteria.size(),
                rep.profile.c_str(), rep.seconds);
    if (!opt.out_dir.empty()) {
        gfe::ResultRecord rec;
        rec.experiment = "verify-" + rep.profile;
        rec.seed = seed;
        rec.workers = workers;
        for (const gfe::CriterionResult& c : rep.criteria) {
            rec.put_check("criterion_" + std::to_string(c.number), c.pass);
            rec.put_note("criterion_" + std::to_string(c.number) + "_detail", c.detail);
        }
        rec.put("suite_seconds", rep.seconds);
        gfe::write_outputs({rec, {}}, opt.out_dir);
    }
    return rep.all_pass ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo experiments on the maxima of Gaussian fields"};
    app.require_subcommand(1);

    const std::pair<const char*, const char*> families[] = {
        {"sim", "supremum statistics and concentration checks"},
        {"peaks", "near-orthogonal peak sets and their event frequencies"},
        {"fe", "free-energy curves and peak events at finite temperature"},
        {"martingale", "Brownian-filtration paths of the conditional maximum"},
        {"tail", "tail exponents of the maximum"},
        {"surface", "level-surface profiles of the maximum"},
    };
    CliOptions opts[7];
    std::size_t k = 0;
    for (const auto& [name, help] : families)
        add_common_flags(app.add_subcommand(name, help), opts[k++], true);
    add_common_flags(app.add_subcommand("verify", "run the acceptance suite"), opts[6], false);

    CLI11_PARSE(app, argc, argv);

    try {
        k = 0;
        for (const auto& [name, help] : families) {
            if (app.got_subcommand(name)) return run_config_command(name, opts[k]);
            ++k;
        }
        return run_verify(opts[6]);
    } catch (const gfe::ConfigError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
