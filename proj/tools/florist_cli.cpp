#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "florist/config.hpp"
#include "florist/reports.hpp"

namespace fs = std::filesystem;
using namespace florist;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    bool force = false;
    bool quiet = false;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Config file (TOML or JSON)")->required();
    cmd->add_option("--out", opts.out_dir, "Output directory")->required();
    cmd->add_flag("--force", opts.force, "Overwrite existing output files");
    cmd->add_flag("--quiet", opts.quiet, "Suppress the summary line");
    cmd->add_option("--seed", [&opts](const std::vector<std::string>& v) {
        opts.seed = std::stoull(v.at(0));
        return true;
    }, "Override the config seed");
}

void ensure_writable(const fs::path& dir, const std::vector<std::string>& files, bool force) {
    fs::create_directories(dir);
    if (force) return;
    for (const auto& f : files) {
        if (fs::exists(dir / f))
            throw io_error("refusing to overwrite " + (dir / f).string() +
                           " (pass --force to allow)");
    }
}

CliConfig load(const CommonOpts& opts) {
    CliConfig cfg = load_config(opts.config_path);
    if (opts.seed) cfg.experiment.seed = *opts.seed;
    return cfg;
}

void echo_config(const CliConfig& cfg, const fs::path& dir) {
    write_text_file(dir / "effective_config.json", effective_config_json(cfg));
}

int run_simulate(const CommonOpts& opts) {
    CliConfig cfg = load(opts);
    const fs::path dir(opts.out_dir);
    ensure_writable(dir, {"rounds.csv", "rounds.json", "final_adapter.fladpt"}, opts.force);
    echo_config(cfg, dir);

    ExperimentResult result = run_experiment(cfg.experiment);
    write_text_file(dir / "rounds.csv", rounds_csv(result.rounds));
    write_text_file(dir / "rounds.json", rounds_json(result.rounds));

    // global adapter of the final round, as an adapter container
    AdapterLayerSet final_set;
    final_set.config = cfg.experiment.model;
    const ModelAggregate& agg = result.final_aggregate;
    for (std::size_t e = 0; e < cfg.experiment.model.entry_count(); ++e) {
        switch (agg.method) {
            case Method::FedIT:
            case Method::FFALoRA: final_set.entries.push_back(agg.averaged[e]); break;
            case Method::FLoRA:
                final_set.entries.push_back(
                    LoraAdapter(agg.stacked[e].b_stack, agg.stacked[e].a_stack));
                break;
            case Method::FlexLoRA:
                final_set.entries.push_back(agg.flex[e].per_client.rbegin()->second);
                break;
            case Method::FLoRIST:
                final_set.entries.push_back(
                    LoraAdapter(agg.global[e].b_g, agg.global[e].a_g));
                break;
            case Method::FullFT: break;
        }
    }
    serialize_set(final_set, dir / "final_adapter.fladpt");

    if (!opts.quiet) {
        const RoundLog& last = result.rounds.back();
        std::size_t total_rank = 0;
        for (std::size_t p : last.per_entry_rank) total_rank += p;
        std::cout << "method=" << method_name(cfg.experiment.method)
                  << " final_loss=" << format_double(last.holdout_loss)
                  << " total_rank=" << total_rank
                  << " download_params=" << last.cost.download_params << "\n";
    }
    return 0;
}

int run_sweep(const CommonOpts& opts) {
    CliConfig cfg = load(opts);
    const fs::path dir(opts.out_dir);
    ensure_writable(dir, {"sweep.csv"}, opts.force);
    echo_config(cfg, dir);

    std::vector<SweepRow> rows = threshold_sweep(cfg.experiment, cfg.taus);
    write_text_file(dir / "sweep.csv", sweep_csv(rows));
    if (!opts.quiet)
        std::cout << "sweep: " << rows.size() << " thresholds, final total_rank="
                  << rows.back().total_rank << "\n";
    return 0;
}

int run_rank_analysis(const CommonOpts& opts) {
    CliConfig cfg = load(opts);
    cfg.experiment.method = Method::FLoRIST;
    const fs::path dir(opts.out_dir);
    ensure_writable(dir, {"rank_report.csv", "spectra.csv"}, opts.force);
    echo_config(cfg, dir);

    ExperimentResult result = run_experiment(cfg.experiment);
    RankReport report = layer_rank_report(result.final_aggregate, cfg.experiment.model);
    write_text_file(dir / "rank_report.csv", rank_report_csv(report, cfg.experiment.model));
    write_text_file(dir / "spectra.csv", spectra_csv(report, cfg.experiment.model));
    if (!opts.quiet) std::cout << "rank-analysis: " << report.rows.size() << " entries\n";
    return 0;
}

int run_cost_report(const CommonOpts& opts) {
    CliConfig cfg = load(opts);
    const fs::path dir(opts.out_dir);
    ensure_writable(dir, {"cost_report.csv", "cost_summary.json"}, opts.force);
    echo_config(cfg, dir);

    // FLoRIST per-entry ranks come from a real aggregation on the base cohort
    ExperimentResult florist_run = [&] {
        ExperimentConfig e = cfg.experiment;
        e.method = Method::FLoRIST;
        e.rounds = 1;
        return run_experiment(e);
    }();
    const std::vector<std::size_t> per_entry_p = florist_run.final_aggregate.per_entry_rank;

    std::vector<CostRow> rows;
    const std::vector<Method> methods = {Method::FullFT, Method::FedIT, Method::FFALoRA,
                                         Method::FLoRA, Method::FlexLoRA, Method::FLoRIST};
    for (Method m : methods) {
        for (std::size_t k : cfg.client_grid) {
            CostScenario s;
            s.model = cfg.experiment.model;
            for (std::size_t i = 0; i < k; ++i) {
                ClientConfig c = cfg.experiment.clients[i % cfg.experiment.clients.size()];
                c.client_id = i;
                s.clients.push_back(c);
            }
            s.method = m;
            if (m == Method::FLoRIST) s.per_entry_p = per_entry_p;
            rows.push_back({m, k, cost_report(s), s.model.bytes_per_param});
        }
    }
    write_text_file(dir / "cost_report.csv", cost_csv(rows));

    CostScenario base;
    base.model = cfg.experiment.model;
    base.clients = cfg.experiment.clients;
    base.method = Method::FlexLoRA;
    const double flex_flops = flops_estimate(base);
    base.method = Method::FLoRIST;
    base.per_entry_p = per_entry_p;
    const double florist_flops = flops_estimate(base);
    const auto crossover = flora_fullft_crossover(base);

    nlohmann::json summary = {
        {"flexlora_florist_flops_ratio", flex_flops / florist_flops},
        {"flora_fullft_crossover_k",
         crossover ? nlohmann::json(*crossover) : nlohmann::json(nullptr)}};
    write_text_file(dir / "cost_summary.json", summary.dump(2) + "\n");

    if (!opts.quiet)
        std::cout << "cost-report: flexlora/florist flops ratio="
                  << format_double(flex_flops / florist_flops) << " crossover_k="
                  << (crossover ? std::to_string(*crossover) : std::string("none")) << "\n";
    return 0;
}

int run_compare(const CommonOpts& opts) {
    CliConfig cfg = load(opts);
    const fs::path dir(opts.out_dir);
    ensure_writable(dir, {"compare.csv"}, opts.force);
    echo_config(cfg, dir);

    const std::vector<Method> methods = {Method::FedIT, Method::FFALoRA, Method::FLoRA,
                                         Method::FlexLoRA, Method::FLoRIST};
    std::size_t max_rank = 0;
    for (const auto& c : cfg.experiment.clients) max_rank = std::max(max_rank, c.rank);

    std::vector<CompareRow> rows;
    for (const std::string& cohort : {std::string("homogeneous"), std::string("heterogeneous")}) {
        ExperimentConfig base = cfg.experiment;
        if (cohort == "homogeneous")
            for (auto& c : base.clients) c.rank = std::min<std::size_t>(16, max_rank);
        for (Method m : methods) {
            ExperimentConfig e = base;
            e.method = m;
            ExperimentResult r = run_experiment(e);
            const RoundLog& last = r.rounds.back();
            std::size_t total_rank = 0;
            for (std::size_t p : last.per_entry_rank) total_rank += p;
            rows.push_back({cohort, m, last.holdout_loss, total_rank,
                            last.cost.download_params, last.cost.server_flops});
        }
    }
    write_text_file(dir / "compare.csv", compare_csv(rows));
    if (!opts.quiet) std::cout << "compare: " << rows.size() << " rows\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated LoRA aggregation toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    auto* simulate = app.add_subcommand("simulate", "Run a federated experiment");
    auto* sweep = app.add_subcommand("sweep", "Threshold sweep on a trained cohort");
    auto* rank = app.add_subcommand("rank-analysis", "Per-layer rank and spectrum report");
    auto* cost = app.add_subcommand("cost-report", "Communication/compute cost tables");
    auto* compare = app.add_subcommand("compare", "Run all methods on the same task");
    for (auto* cmd : {simulate, sweep, rank, cost, compare}) add_common(cmd, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return run_simulate(opts);
        if (sweep->parsed()) return run_sweep(opts);
        if (rank->parsed()) return run_rank_analysis(opts);
        if (cost->parsed()) return run_cost_report(opts);
        if (compare->parsed()) return run_compare(opts);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const container_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return 0;
}
