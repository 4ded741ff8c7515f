#include "florist/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>

namespace florist {

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    auto splitmix = [](std::uint64_t& state) {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t state = master;
    std::uint64_t h = splitmix(state);
    state ^= a * 0xff51afd7ed558ccdULL;
    h ^= splitmix(state);
    state ^= b * 0xc4ceb9fe1a85ec53ULL;
    h ^= splitmix(state);
    state ^= c * 0x2545f4914f6cdd1dULL;
    h ^= splitmix(state);
    return h;
}

void ExperimentConfig::validate() const {
    model.validate();
    if (clients.empty()) throw std::invalid_argument("config: clients must be non-empty");
    for (const auto& c : clients) {
        if (c.rank < 1) throw std::invalid_argument("config: client rank must be >= 1");
        if (c.dataset_size < 1)
            throw std::invalid_argument("config: client dataset_size must be >= 1");
    }
    if (rounds < 1) throw std::invalid_argument("config: rounds must be >= 1");
    if (local_epochs < 1) throw std::invalid_argument("config: local_epochs must be >= 1");
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("config: learning_rate must be positive");
    if (noise_sigma < 0.0) throw std::invalid_argument("config: noise_sigma must be >= 0");
    if (planted_rank < 1) throw std::invalid_argument("config: planted_rank must be >= 1");
    policy.validate();
    if (method == Method::FullFT)
        throw std::invalid_argument("config: method fullft is cost-model only");
}

namespace {

Matrix random_normal(std::size_t rows, std::size_t cols, std::uint64_t seed, double stddev) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = dist(rng);
    return m;
}

EntryData make_entry_data(const Matrix& w_true, std::size_t samples, double sigma,
                          std::uint64_t seed) {
    const std::size_t m = w_true.rows(), n = w_true.cols();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    EntryData d;
    d.x = Matrix(n, samples);
    for (double& v : d.x.data()) v = unit(rng);
    d.y = matmul(w_true, d.x);
    if (sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, sigma);
        for (double& v : d.y.data()) v += noise(rng);
    }
    return d;
}

}  // namespace

SyntheticTask make_task(const ExperimentConfig& cfg) {
    cfg.validate();
    SyntheticTask task;
    task.model = cfg.model;
    task.planted_rank = cfg.planted_rank;
    task.noise_sigma = cfg.noise_sigma;

    const std::size_t entries = cfg.model.entry_count();
    task.w0.reserve(entries);
    task.w_star_delta.reserve(entries);
    for (std::size_t e = 0; e < entries; ++e) {
        const auto& d = cfg.model.dims[e];
        task.w0.push_back(random_normal(d.m, d.n, mix_seed(cfg.seed, 1, e),
                                        1.0 / std::sqrt(static_cast<double>(d.n))));
        // exact rank r_star by construction
        const Matrix left = random_normal(d.m, cfg.planted_rank, mix_seed(cfg.seed, 2, e), 1.0);
        const Matrix right = random_normal(cfg.planted_rank, d.n, mix_seed(cfg.seed, 3, e), 1.0);
        task.w_star_delta.push_back(scale(
            matmul(left, right),
            1.0 / std::sqrt(static_cast<double>(d.n * cfg.planted_rank))));
    }

    task.client_data.resize(cfg.clients.size());
    for (std::size_t k = 0; k < cfg.clients.size(); ++k) {
        task.client_data[k].reserve(entries);
        for (std::size_t e = 0; e < entries; ++e) {
            const Matrix w_true = add(task.w0[e], task.w_star_delta[e]);
            task.client_data[k].push_back(make_entry_data(
                w_true, cfg.clients[k].dataset_size, cfg.noise_sigma,
                mix_seed(cfg.seed, 4, cfg.clients[k].client_id + 1, e)));
        }
    }
    task.holdout.reserve(entries);
    for (std::size_t e = 0; e < entries; ++e) {
        const Matrix w_true = add(task.w0[e], task.w_star_delta[e]);
        task.holdout.push_back(make_entry_data(w_true, cfg.holdout_samples, cfg.noise_sigma,
                                               mix_seed(cfg.seed, 5, e)));
    }
    return task;
}

LoraAdapter init_local_adapter(std::size_t m, std::size_t n, std::size_t r,
                               std::uint64_t seed) {
    if (r < 1) throw std::invalid_argument("init_local_adapter: rank must be >= 1");
    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(r));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix a(r, n);
    for (double& v : a.data()) v = dist(rng);
    Matrix b(m, r);  // zeros: initial update is exactly zero
    return LoraAdapter(std::move(b), std::move(a));
}

double local_loss(const EntryData& data, const Matrix& w_effective) {
    const Matrix pred = matmul(w_effective, data.x);
    const Matrix r = subtract(pred, data.y);
    const double f = frobenius_norm(r);
    return f * f / static_cast<double>(data.x.cols());
}

void local_loss_gradients(const EntryData& data, const Matrix& w0_effective,
                          const LoraAdapter& adapter, Matrix& grad_b, Matrix& grad_a) {
    const double inv_s = 1.0 / static_cast<double>(data.x.cols());
    const Matrix ax = matmul(adapter.a, data.x);              // r x S
    Matrix residual = subtract(matmul(w0_effective, data.x), data.y);
    const Matrix bax = matmul(adapter.b, ax);
    for (std::size_t i = 0; i < residual.size(); ++i) residual.data()[i] += bax.data()[i];

    grad_b = scale(matmul(residual, transpose(ax)), 2.0 * inv_s);       // m x r
    grad_a = scale(matmul(matmul(transpose(adapter.b), residual), transpose(data.x)),
                   2.0 * inv_s);                                        // r x n
}

LoraAdapter local_update(const EntryData& data, const Matrix& w0_effective,
                         LoraAdapter adapter, std::size_t epochs, double lr, bool freeze_a) {
    const std::size_t samples = data.x.cols();
    const double inv_s = 1.0 / static_cast<double>(samples);
    // residual of the frozen part, constant across epochs
    const Matrix base_residual = subtract(matmul(w0_effective, data.x), data.y);

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const Matrix ax = matmul(adapter.a, data.x);  // r x S
        Matrix residual = base_residual;
        const Matrix bax = matmul(adapter.b, ax);
        for (std::size_t i = 0; i < residual.size(); ++i) residual.data()[i] += bax.data()[i];

        const double fnorm = frobenius_norm(residual);
        const double loss = fnorm * fnorm * inv_s;
        if (!std::isfinite(loss) || loss > 1e12)
            throw divergence_error("local_update: diverged at epoch " + std::to_string(epoch),
                                   epoch);

        const Matrix grad_b = scale(matmul(residual, transpose(ax)), 2.0 * inv_s);
        if (freeze_a) {
            axpy(adapter.b, -lr, grad_b);
        } else {
            const Matrix grad_a =
                scale(matmul(matmul(transpose(adapter.b), residual), transpose(data.x)),
                      2.0 * inv_s);
            axpy(adapter.b, -lr, grad_b);
            axpy(adapter.a, -lr, grad_a);
        }
    }
    return adapter;
}

Matrix merge_global(const Matrix& w0, const GlobalAdapter& global) {
    if (global.rank == 0) return w0;
    if (global.b_g.rows() != w0.rows() || global.a_g.cols() != w0.cols())
        throw dimension_error("merge_global: shape mismatch");
    return add(w0, global.product());
}

namespace {

struct BroadcastView {
    // per client, per entry: the update product merged into that client's base
    std::vector<std::vector<Matrix>> per_client_products;
    // server-view product per entry (what the evaluated global model uses)
    std::vector<Matrix> server_products;
    std::size_t download_params = 0;  // measured from transmitted matrices
};

BroadcastView broadcast_of(const ModelAggregate& agg, const ModelConfig& model,
                           std::size_t client_count) {
    const std::size_t entries = model.entry_count();
    BroadcastView bv;
    bv.server_products.resize(entries);
    std::size_t per_client_params = 0;

    switch (agg.method) {
        case Method::FedIT: {
            for (std::size_t e = 0; e < entries; ++e) {
                bv.server_products[e] = agg.averaged[e].product();
                per_client_params += agg.averaged[e].b.size() + agg.averaged[e].a.size();
            }
            bv.download_params = client_count * per_client_params;
            break;
        }
        case Method::FFALoRA: {
            for (std::size_t e = 0; e < entries; ++e) {
                bv.server_products[e] = agg.averaged[e].product();
                per_client_params += agg.averaged[e].b.size();  // A never moves
            }
            bv.download_params = client_count * per_client_params;
            break;
        }
        case Method::FLoRA: {
            for (std::size_t e = 0; e < entries; ++e) {
                bv.server_products[e] = matmul(agg.stacked[e].b_stack, agg.stacked[e].a_stack);
                per_client_params += agg.stacked[e].b_stack.size() + agg.stacked[e].a_stack.size();
            }
            bv.download_params = client_count * per_client_params;
            break;
        }
        case Method::FlexLoRA: {
            bv.per_client_products.resize(client_count);
            for (std::size_t k = 0; k < client_count; ++k)
                bv.per_client_products[k].resize(entries);
            for (std::size_t e = 0; e < entries; ++e) {
                std::size_t best_rank = 0, best_client = 0;
                for (const auto& [k, ad] : agg.flex[e].per_client) {
                    bv.per_client_products[k][e] = ad.product();
                    bv.download_params += ad.b.size() + ad.a.size();
                    if (ad.rank >= best_rank) {
                        best_rank = ad.rank;
                        best_client = k;
                    }
                }
                // evaluate the highest-rank truncation as the global model
                bv.server_products[e] = bv.per_client_products[best_client][e];
            }
            break;
        }
        case Method::FLoRIST: {
            for (std::size_t e = 0; e < entries; ++e) {
                bv.server_products[e] = agg.global[e].product();
                per_client_params += agg.global[e].b_g.size() + agg.global[e].a_g.size();
            }
            bv.download_params = client_count * per_client_params;
            break;
        }
        case Method::FullFT: break;
    }
    return bv;
}

double holdout_loss_of(const SyntheticTask& task, const std::vector<Matrix>& merged) {
    double total = 0.0;
    for (std::size_t e = 0; e < task.holdout.size(); ++e)
        total += local_loss(task.holdout[e], merged[e]);
    return total / static_cast<double>(task.holdout.size());
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t entries = cfg.model.entry_count();
    const std::size_t clients = cfg.clients.size();

    ExperimentResult result;
    result.task = make_task(cfg);
    const SyntheticTask& task = result.task;

    std::size_t max_rank = 0;
    bool heterogeneous = false;
    for (const auto& c : cfg.clients) {
        if (max_rank != 0 && c.rank != max_rank) heterogeneous = true;
        max_rank = std::max(max_rank, c.rank);
    }
    if (heterogeneous && (cfg.method == Method::FedIT || cfg.method == Method::FFALoRA))
        std::cerr << "warning: heterogeneous cohort zero-padded to rank " << max_rank
                  << " for " << method_name(cfg.method) << "\n";

    // frozen A for FFA-LoRA, shared across clients and rounds
    std::vector<Matrix> a_init;
    if (cfg.method == Method::FFALoRA) {
        a_init.reserve(entries);
        for (std::size_t e = 0; e < entries; ++e) {
            std::mt19937_64 rng(mix_seed(cfg.seed, 6, e));
            const double bound = 1.0 / std::sqrt(static_cast<double>(max_rank));
            std::uniform_real_distribution<double> dist(-bound, bound);
            Matrix a(max_rank, cfg.model.dims[e].n);
            for (double& v : a.data()) v = dist(rng);
            a_init.push_back(std::move(a));
        }
    }

    // per-client base weights (clients merge broadcast updates locally)
    std::vector<std::vector<Matrix>> client_base(clients, task.w0);
    std::vector<Matrix> server_merged = task.w0;

    for (std::size_t round = 1; round <= cfg.rounds; ++round) {
        std::vector<AdapterLayerSet> sets(clients);
        for (std::size_t k = 0; k < clients; ++k) {
            sets[k].config = cfg.model;
            sets[k].entries.resize(entries);
        }

        std::exception_ptr failure;
#pragma omp parallel for collapse(2) schedule(dynamic)
        for (std::ptrdiff_t ki = 0; ki < static_cast<std::ptrdiff_t>(clients); ++ki) {
            for (std::ptrdiff_t ei = 0; ei < static_cast<std::ptrdiff_t>(entries); ++ei) {
                try {
                    const std::size_t k = static_cast<std::size_t>(ki);
                    const std::size_t e = static_cast<std::size_t>(ei);
                    const auto& d = cfg.model.dims[e];
                    const std::size_t r =
                        cfg.method == Method::FFALoRA ? max_rank : cfg.clients[k].rank;
                    LoraAdapter adapter = init_local_adapter(
                        d.m, d.n, r,
                        mix_seed(cfg.seed, 7, cfg.clients[k].client_id + 1, e * 1000 + round));
                    if (cfg.method == Method::FFALoRA) adapter.a = a_init[e];
                    sets[k].entries[e] = local_update(
                        task.client_data[k][e], client_base[k][e], std::move(adapter),
                        cfg.local_epochs, cfg.learning_rate,
                        cfg.method == Method::FFALoRA);
                } catch (...) {
#pragma omp critical
                    if (!failure) failure = std::current_exception();
                }
            }
        }
        if (failure) std::rethrow_exception(failure);

        std::size_t measured_upload = 0;
        for (std::size_t k = 0; k < clients; ++k) {
            if (cfg.method == Method::FedIT) {
                AdapterLayerSet padded = sets[k];
                for (auto& e : padded.entries) e = zero_pad(e, max_rank);
                measured_upload += set_param_count(padded);
            } else if (cfg.method == Method::FFALoRA) {
                for (const auto& e : sets[k].entries) measured_upload += e.b.size();
            } else {
                measured_upload += set_param_count(sets[k]);
            }
        }

        ModelAggregate agg = aggregate_model(cfg.method, sets, cfg.clients, cfg.policy,
                                             a_init.empty() ? nullptr : &a_init);
        BroadcastView bv = broadcast_of(agg, cfg.model, clients);

        // reconstruction error against the dense oracle aggregate
        const std::vector<double> weights = cohort_weights(cfg.clients);
        double recon_sq = 0.0;
        for (std::size_t e = 0; e < entries; ++e) {
            std::vector<LoraAdapter> cohort;
            for (const auto& s : sets) cohort.push_back(s.entries[e]);
            const Matrix oracle = oracle_delta_w(cohort, weights);
            const double diff = frobenius_norm(subtract(bv.server_products[e], oracle));
            recon_sq += diff * diff;
        }

        // merge broadcast into every client base and the evaluated model
        for (std::size_t k = 0; k < clients; ++k) {
            for (std::size_t e = 0; e < entries; ++e) {
                const Matrix& update = bv.per_client_products.empty()
                                           ? bv.server_products[e]
                                           : bv.per_client_products[k][e];
                client_base[k][e] = add(client_base[k][e], update);
            }
        }
        for (std::size_t e = 0; e < entries; ++e)
            server_merged[e] = add(server_merged[e], bv.server_products[e]);

        CostScenario scenario;
        scenario.model = cfg.model;
        scenario.clients = cfg.clients;
        scenario.method = cfg.method;
        if (cfg.method == Method::FLoRIST) scenario.per_entry_p = agg.per_entry_rank;

        RoundLog log;
        log.round = round;
        log.per_entry_rank = agg.per_entry_rank;
        log.recon_error = std::sqrt(recon_sq);
        log.holdout_loss = holdout_loss_of(task, server_merged);
        log.cost = cost_report(scenario);
        log.seed = mix_seed(cfg.seed, 8, round);
        log.measured_upload_params = measured_upload;
        log.measured_download_params = bv.download_params;
        result.rounds.push_back(std::move(log));

        if (round == cfg.rounds) {
            result.final_aggregate = std::move(agg);
            result.final_client_sets = std::move(sets);
        }
    }
    result.merged_weights = std::move(server_merged);
    return result;
}

std::vector<SweepRow> threshold_sweep(const ExperimentConfig& cfg,
                                      const std::vector<double>& taus) {
    for (double t : taus)
        if (!(t > 0.0) || t > 1.0)
            throw std::invalid_argument("threshold_sweep: taus must be in (0, 1]");

    ExperimentConfig base = cfg;
    base.method = Method::FLoRIST;
    base.rounds = 1;
    ExperimentResult trained = run_experiment(base);
    const std::vector<AdapterLayerSet>& sets = trained.final_client_sets;
    const std::vector<double> weights = cohort_weights(cfg.clients);
    const std::size_t entries = cfg.model.entry_count();

    // dense oracle per entry, shared across all taus
    std::vector<Matrix> oracle(entries);
    double oracle_norm_sq = 0.0;
    for (std::size_t e = 0; e < entries; ++e) {
        std::vector<LoraAdapter> cohort;
        for (const auto& s : sets) cohort.push_back(s.entries[e]);
        oracle[e] = oracle_delta_w(cohort, weights);
        const double f = frobenius_norm(oracle[e]);
        oracle_norm_sq += f * f;
    }
    const double oracle_norm = std::sqrt(oracle_norm_sq);

    std::vector<SweepRow> rows;
    for (double tau : taus) {
        ThresholdPolicy policy;
        policy.tau = tau;
        ModelAggregate agg = aggregate_model(Method::FLoRIST, sets, cfg.clients, policy);

        SweepRow row;
        row.tau = tau;
        double recon_sq = 0.0;
        std::vector<Matrix> merged = trained.task.w0;
        for (std::size_t e = 0; e < entries; ++e) {
            row.total_rank += agg.global[e].rank;
            const Matrix prod = agg.global[e].product();
            const double diff = frobenius_norm(subtract(prod, oracle[e]));
            recon_sq += diff * diff;
            merged[e] = add(merged[e], prod);
        }
        row.recon_error = std::sqrt(recon_sq) / (1.0 + oracle_norm);
        row.holdout_loss = holdout_loss_of(trained.task, merged);

        CostScenario scenario;
        scenario.model = cfg.model;
        scenario.clients = cfg.clients;
        scenario.method = Method::FLoRIST;
        scenario.per_entry_p = agg.per_entry_rank;
        row.download_params = comm_cost(scenario).download_params;
        row.efficiency = row.total_rank > 0 ? 1.0 / static_cast<double>(row.total_rank) : 0.0;
        rows.push_back(row);
    }
    return rows;
}

RankReport layer_rank_report(const ModelAggregate& agg, const ModelConfig& model) {
    if (agg.method != Method::FLoRIST)
        throw std::invalid_argument("layer_rank_report: requires a FLoRIST aggregation");
    RankReport report;
    for (std::size_t l = 0; l < model.layers; ++l) {
        for (std::size_t p = 0; p < model.projections.size(); ++p) {
            const std::size_t e = model.entry_index(l, p);
            report.rows.push_back({l, p, agg.global[e].rank, agg.global[e].energy_retained});
        }
    }
    report.spectra = agg.spectra;
    return report;
}

}  // namespace florist
