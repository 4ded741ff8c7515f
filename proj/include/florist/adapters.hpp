#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "florist/matrix.hpp"

namespace florist {

struct ProjectionDims {
    std::size_t m = 0;  // output dim
    std::size_t n = 0;  // input dim
    bool operator==(const ProjectionDims&) const = default;
};

/// Shape description of the model the adapters attach to: L layers, an
/// ordered list of projection names, and per-(layer, projection) dims.
struct ModelConfig {
    std::size_t layers = 0;
    std::vector<std::string> projections;
    std::vector<ProjectionDims> dims;  // layer-major, projection-minor
    std::size_t bytes_per_param = 2;

    static ModelConfig uniform(std::size_t layers, std::vector<std::string> projections,
                               std::size_t m, std::size_t n, std::size_t bytes_per_param = 2);

    std::size_t entry_count() const { return layers * projections.size(); }
    std::size_t entry_index(std::size_t layer, std::size_t proj) const {
        return layer * projections.size() + proj;
    }
    const ProjectionDims& dims_at(std::size_t layer, std::size_t proj) const {
        return dims[entry_index(layer, proj)];
    }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct ClientConfig {
    std::size_t client_id = 0;
    std::size_t rank = 1;          // r_k
    std::size_t dataset_size = 1;  // n_k
};

/// Dataset-size weights n_k / N, validated to sum to 1.
std::vector<double> cohort_weights(const std::vector<ClientConfig>& clients);

/// One (B, A) low-rank pair for a single weight matrix.
struct LoraAdapter {
    Matrix b;  // m x r
    Matrix a;  // r x n
    std::size_t rank = 0;

    LoraAdapter() = default;
    LoraAdapter(Matrix b, Matrix a);

    std::size_t m() const { return b.rows(); }
    std::size_t n() const { return a.cols(); }
    Matrix product() const { return matmul(b, a); }
};

/// Per-(layer, projection) adapters for a whole model; what one client
/// uploads per round.
struct AdapterLayerSet {
    ModelConfig config;
    std::vector<LoraAdapter> entries;  // indexed by config.entry_index

    LoraAdapter& at(std::size_t layer, std::size_t proj) {
        return entries[config.entry_index(layer, proj)];
    }
    const LoraAdapter& at(std::size_t layer, std::size_t proj) const {
        return entries[config.entry_index(layer, proj)];
    }
    void validate() const;
};

struct ClientSpan {
    std::size_t client_id = 0;
    std::size_t offset = 0;
    std::size_t rank = 0;
};

/// Horizontally stacked B factors and vertically stacked weighted A
/// factors; the product equals the weighted dense aggregate.
struct StackedPair {
    Matrix b_stack;  // m x r
    Matrix a_stack;  // r x n
    std::size_t total_rank = 0;
    std::vector<ClientSpan> client_spans;
};

/// Thresholded global pair of rank p broadcast by the server.
struct GlobalAdapter {
    Matrix b_g;  // m x p
    Matrix a_g;  // p x n
    std::size_t rank = 0;
    double energy_retained = 1.0;
    double tau = 1.0;

    Matrix product() const;
};

StackedPair stack(const std::vector<LoraAdapter>& adapters, const std::vector<double>& weights);

LoraAdapter zero_pad(const LoraAdapter& adapter, std::size_t target_rank);

class container_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class malformed_header_error : public container_error {
public:
    using container_error::container_error;
};
class dimension_inconsistency_error : public container_error {
public:
    using container_error::container_error;
};
class truncated_payload_error : public container_error {
public:
    using container_error::container_error;
};

/// Adapter container format: 8-byte magic "FLADPT01", u32 little-endian
/// header length, UTF-8 JSON header, then raw little-endian float64
/// payloads (row-major, B before A, entries in index order).
void serialize_set(const AdapterLayerSet& set, const std::filesystem::path& path);
AdapterLayerSet deserialize_set(const std::filesystem::path& path);

/// Number of parameters a serialized set carries (payload bytes / 8).
std::size_t set_param_count(const AdapterLayerSet& set);

}  // namespace florist
