#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "florist/adapters.hpp"
#include "florist/aggregation.hpp"
#include "florist/costmodel.hpp"

namespace florist {

/// Deterministic seed mixing (splitmix64-style); adding a client or an
/// entry never perturbs the streams of the others.
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0);

/// Planted low-rank regression task: per entry a frozen base W0 and a
/// ground-truth update of exact rank r_star; client data y = (W0 + dW*)x
/// + noise.
struct EntryData {
    Matrix x;  // n x samples
    Matrix y;  // m x samples
};

struct SyntheticTask {
    ModelConfig model;
    std::vector<Matrix> w0;            // per entry, m x n
    std::vector<Matrix> w_star_delta;  // per entry, m x n, rank r_star
    std::vector<std::vector<EntryData>> client_data;  // [client][entry]
    std::vector<EntryData> holdout;                   // per entry
    std::size_t planted_rank = 3;
    double noise_sigma = 0.0;
};

struct ExperimentConfig {
    ModelConfig model = ModelConfig::uniform(4, {"q_proj", "v_proj"}, 64, 64);
    std::vector<ClientConfig> clients;
    Method method = Method::FLoRIST;
    ThresholdPolicy policy;
    std::size_t rounds = 1;
    std::size_t local_epochs = 50;
    double learning_rate = 0.05;
    double noise_sigma = 0.01;
    std::size_t planted_rank = 3;
    std::size_t holdout_samples = 128;
    std::uint64_t seed = 42;

    void validate() const;
};

struct RoundLog {
    std::size_t round = 0;
    std::vector<std::size_t> per_entry_rank;  // broadcast rank per entry
    double recon_error = 0.0;   // ||B_g A_g - oracle dW||_F over all entries
    double holdout_loss = 0.0;  // merged-model MSE on held-out data
    CostReport cost;
    std::uint64_t seed = 0;
    // Parameters actually carried by this round's transmissions, measured
    // from the matrices that would be serialized.
    std::size_t measured_upload_params = 0;
    std::size_t measured_download_params = 0;
};

struct ExperimentResult {
    std::vector<RoundLog> rounds;
    // Per-entry merged weights after the final round.
    std::vector<Matrix> merged_weights;
    // Final aggregation output (for serialization / rank analysis).
    ModelAggregate final_aggregate;
    // Client adapter sets from the final round (reused by sweeps).
    std::vector<AdapterLayerSet> final_client_sets;
    SyntheticTask task;
};

SyntheticTask make_task(const ExperimentConfig& cfg);

LoraAdapter init_local_adapter(std::size_t m, std::size_t n, std::size_t r, std::uint64_t seed);

class divergence_error : public std::runtime_error {
public:
    divergence_error(const std::string& what, std::size_t epoch)
        : std::runtime_error(what), epoch(epoch) {}
    std::size_t epoch;
};

/// Full-batch gradient descent on mean squared loss
/// (1/samples) * ||y - (w0_eff + B A) x||_F^2 for the given epochs.
/// freeze_a: FFA-LoRA mode, only B is updated.
LoraAdapter local_update(const EntryData& data, const Matrix& w0_effective,
                         LoraAdapter adapter, std::size_t epochs, double lr,
                         bool freeze_a = false);

/// Analytic gradients of the local loss, exposed for gradient checking.
void local_loss_gradients(const EntryData& data, const Matrix& w0_effective,
                          const LoraAdapter& adapter, Matrix& grad_b, Matrix& grad_a);
double local_loss(const EntryData& data, const Matrix& w_effective);

Matrix merge_global(const Matrix& w0, const GlobalAdapter& global);

ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
    double tau = 0.0;
    std::size_t total_rank = 0;
    double recon_error = 0.0;
    double holdout_loss = 0.0;
    std::size_t download_params = 0;
    double efficiency = 0.0;
};

/// One aggregation per tau, reusing client adapters trained once.
std::vector<SweepRow> threshold_sweep(const ExperimentConfig& cfg,
                                      const std::vector<double>& taus);

struct RankReportRow {
    std::size_t layer = 0;
    std::size_t projection = 0;
    std::size_t rank = 0;
    double energy_retained = 0.0;
};

struct RankReport {
    std::vector<RankReportRow> rows;
    std::vector<std::vector<double>> spectra;  // per entry, singular values of P
};

RankReport layer_rank_report(const ModelAggregate& agg, const ModelConfig& model);

}  // namespace florist
