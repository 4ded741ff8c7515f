#pragma once

#include <optional>
#include <vector>

#include "florist/adapters.hpp"
#include "florist/aggregation.hpp"

namespace florist {

/// Documented constant for dense thin-SVD cost: c_svd * max(d1,d2) * min(d1,d2)^2.
inline constexpr double kSvdFlopConstant = 14.0;

struct CostScenario {
    ModelConfig model;
    std::vector<ClientConfig> clients;
    Method method = Method::FLoRIST;
    // Per-(layer, projection) broadcast rank, config entry order.
    // Required for FLoRIST, ignored otherwise.
    std::optional<std::vector<std::size_t>> per_entry_p;
    double svd_flop_constant = kSvdFlopConstant;

    void validate() const;
};

struct CostReport {
    Method method = Method::FLoRIST;
    std::size_t clients = 0;
    std::size_t upload_params = 0;
    std::size_t download_params = 0;
    std::size_t upload_bytes = 0;
    std::size_t download_bytes = 0;
    // FFA-LoRA only: one-time broadcast of the frozen A factors, reported
    // separately from per-round traffic.
    std::size_t one_time_download_params = 0;
    double server_flops = 0.0;
    std::size_t client_peak_params = 0;
    std::size_t server_peak_params = 0;
    std::size_t total_rank = 0;  // sum of broadcast ranks over entries
    double efficiency = 0.0;     // 1 / total_rank

    double upload_mb(std::size_t bytes_per_param) const;
    double download_mb(std::size_t bytes_per_param) const;
};

struct CommCost {
    std::size_t upload_params = 0;
    std::size_t download_params = 0;
    std::size_t one_time_download_params = 0;
};

CommCost comm_cost(const CostScenario& scenario);
double flops_estimate(const CostScenario& scenario);

struct MemoryCost {
    std::size_t client_peak_params = 0;
    std::size_t server_peak_params = 0;
};
MemoryCost memory_cost(const CostScenario& scenario);

double efficiency(std::size_t total_rank);

/// Total broadcast rank for the scenario (sum over entries of the
/// per-entry download rank the method uses).
std::size_t scenario_total_rank(const CostScenario& scenario);

CostReport cost_report(const CostScenario& scenario);

struct ScalingPoint {
    std::size_t client_count = 0;
    std::size_t upload_params = 0;
    std::size_t download_params = 0;
};

/// Closed-form extrapolation of comm_cost over client counts. Cohorts of
/// size K are built by cycling the base scenario's client ranks/sizes.
std::vector<ScalingPoint> scaling_curve(Method method, const CostScenario& base,
                                        const std::vector<std::size_t>& client_counts);

/// Smallest K (searched up to limit) where FLoRA total download exceeds
/// FullFT total download; nullopt if none found below the limit.
std::optional<std::size_t> flora_fullft_crossover(const CostScenario& base,
                                                  std::size_t k_limit = 100000);

}  // namespace florist
