#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "florist/adapters.hpp"
#include "florist/svd.hpp"

namespace florist {

enum class Method { FullFT, FedIT, FFALoRA, FLoRA, FlexLoRA, FLoRIST };

std::string method_name(Method m);
std::optional<Method> parse_method(const std::string& name);

struct ThresholdPolicy {
    enum class Variant { Optimal, Efficient, Fixed };
    double tau = 0.99;
    Variant variant = Variant::Fixed;

    void validate() const;
};

/// FedAvg of B and A factors independently. Requires a rank-homogeneous
/// cohort; the implied product carries cross-term noise.
LoraAdapter fedit_aggregate(const std::vector<LoraAdapter>& adapters,
                            const std::vector<double>& weights);

/// Average only the trainable B factors against a shared frozen A.
LoraAdapter ffa_aggregate(const std::vector<Matrix>& b_list, const std::vector<double>& weights,
                          const Matrix& a_init);

/// Stacking aggregation; exact by construction.
StackedPair flora_aggregate(const std::vector<LoraAdapter>& adapters,
                            const std::vector<double>& weights);

/// Dense weighted sum of client products; the ground truth every method
/// is compared against.
Matrix oracle_delta_w(const std::vector<LoraAdapter>& adapters,
                      const std::vector<double>& weights);

struct FlexLoraOutput {
    std::map<std::size_t, LoraAdapter> per_client;
};

/// Dense aggregate + full thin SVD + per-client rank truncation.
FlexLoraOutput flexlora_aggregate(const std::vector<LoraAdapter>& adapters,
                                  const std::vector<double>& weights,
                                  const std::vector<std::size_t>& client_ranks);

/// Smallest p with (sum_{i<=p} s_i^2) / (sum_i s_i^2) >= tau;
/// 0 if all singular values are zero.
std::size_t energy_rank(const std::vector<double>& s, double tau);

/// Stacked-SVD aggregation with singular value thresholding. Works in the
/// r x r intermediate space and never allocates an m x n matrix.
GlobalAdapter florist_aggregate(const std::vector<LoraAdapter>& adapters,
                                const std::vector<double>& weights,
                                const ThresholdPolicy& policy);

/// florist_aggregate plus the singular value spectrum of the intermediate
/// matrix, for rank-analysis output.
struct FloristDetail {
    GlobalAdapter global;
    std::vector<double> spectrum;  // singular values of P, non-increasing
};
FloristDetail florist_aggregate_detailed(const std::vector<LoraAdapter>& adapters,
                                         const std::vector<double>& weights,
                                         const ThresholdPolicy& policy);

/// Per-(layer, projection) aggregation output for a whole model; exactly
/// one of the per-method vectors is populated.
struct ModelAggregate {
    Method method = Method::FLoRIST;
    std::vector<LoraAdapter> averaged;      // FedIT, FFA-LoRA
    std::vector<StackedPair> stacked;       // FLoRA
    std::vector<FlexLoraOutput> flex;       // FlexLoRA
    std::vector<GlobalAdapter> global;      // FLoRIST
    std::vector<std::vector<double>> spectra;  // FLoRIST: spectrum of P per entry
    std::vector<std::size_t> per_entry_rank;   // broadcast rank per entry
};

/// Lift the chosen per-matrix aggregation over every (layer, projection)
/// entry. Entries are independent; execution may be parallel but output
/// is deterministic. FedIT/FFA-LoRA cohorts are zero-padded to the max
/// client rank automatically. For FFA-LoRA, a_init per entry is required.
ModelAggregate aggregate_model(Method method, const std::vector<AdapterLayerSet>& sets,
                               const std::vector<ClientConfig>& clients,
                               const ThresholdPolicy& policy,
                               const std::vector<Matrix>* a_init_per_entry = nullptr);

}  // namespace florist
