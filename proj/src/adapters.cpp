#include "florist/adapters.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace florist {

static_assert(std::endian::native == std::endian::little,
              "container format assumes a little-endian host");

ModelConfig ModelConfig::uniform(std::size_t layers, std::vector<std::string> projections,
                                 std::size_t m, std::size_t n, std::size_t bytes_per_param) {
    ModelConfig c;
    c.layers = layers;
    c.projections = std::move(projections);
    c.dims.assign(c.layers * c.projections.size(), ProjectionDims{m, n});
    c.bytes_per_param = bytes_per_param;
    return c;
}

void ModelConfig::validate() const {
    if (layers < 1) throw std::invalid_argument("ModelConfig: layers must be >= 1");
    if (dims.size() != layers * projections.size())
        throw std::invalid_argument("ModelConfig: dims size mismatch");
    for (const auto& d : dims)
        if (d.m < 1 || d.n < 1)
            throw std::invalid_argument("ModelConfig: dims must be >= 1");
}

std::vector<double> cohort_weights(const std::vector<ClientConfig>& clients) {
    if (clients.empty()) throw std::invalid_argument("cohort_weights: empty cohort");
    double total = 0.0;
    for (const auto& c : clients) {
        if (c.dataset_size < 1)
            throw std::invalid_argument("cohort_weights: dataset_size must be >= 1");
        total += static_cast<double>(c.dataset_size);
    }
    std::vector<double> w;
    w.reserve(clients.size());
    for (const auto& c : clients) w.push_back(static_cast<double>(c.dataset_size) / total);
    return w;
}

LoraAdapter::LoraAdapter(Matrix b_in, Matrix a_in) : b(std::move(b_in)), a(std::move(a_in)) {
    if (b.cols() != a.rows())
        throw dimension_error("LoraAdapter: b is " + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()) + " but a is " + std::to_string(a.rows()) +
                              "x" + std::to_string(a.cols()));
    rank = b.cols();
}

void AdapterLayerSet::validate() const {
    config.validate();
    if (entries.size() != config.entry_count())
        throw std::invalid_argument("AdapterLayerSet: entry count mismatch");
    for (std::size_t l = 0; l < config.layers; ++l) {
        for (std::size_t p = 0; p < config.projections.size(); ++p) {
            const auto& d = config.dims_at(l, p);
            const auto& e = at(l, p);
            if (e.m() != d.m || e.n() != d.n)
                throw dimension_error("AdapterLayerSet: entry dims mismatch at layer " +
                                      std::to_string(l));
        }
    }
}

Matrix GlobalAdapter::product() const {
    if (rank == 0) {
        // empty adapter: product is the zero update
        return Matrix(b_g.rows(), a_g.cols());
    }
    return matmul(b_g, a_g);
}

StackedPair stack(const std::vector<LoraAdapter>& adapters, const std::vector<double>& weights) {
    if (adapters.empty()) throw std::invalid_argument("stack: no adapters");
    if (weights.size() != adapters.size())
        throw std::invalid_argument("stack: weights length mismatch");
    double wsum = 0.0;
    for (double w : weights) {
        if (w <= 0.0) throw std::invalid_argument("stack: weights must be positive");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("stack: weights must sum to 1, got " + std::to_string(wsum));

    const std::size_t m = adapters.front().m();
    const std::size_t n = adapters.front().n();
    std::size_t total = 0;
    for (const auto& ad : adapters) {
        if (ad.m() != m || ad.n() != n)
            throw dimension_error("stack: adapter dims differ across clients");
        total += ad.rank;
    }

    StackedPair sp;
    sp.total_rank = total;
    sp.b_stack = Matrix(m, total);
    sp.a_stack = Matrix(total, n);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < adapters.size(); ++k) {
        const auto& ad = adapters[k];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < ad.rank; ++j) sp.b_stack(i, offset + j) = ad.b(i, j);
        for (std::size_t i = 0; i < ad.rank; ++i)
            for (std::size_t j = 0; j < n; ++j)
                sp.a_stack(offset + i, j) = weights[k] * ad.a(i, j);
        sp.client_spans.push_back({k, offset, ad.rank});
        offset += ad.rank;
    }
    return sp;
}

LoraAdapter zero_pad(const LoraAdapter& adapter, std::size_t target_rank) {
    if (target_rank < adapter.rank)
        throw std::invalid_argument("zero_pad: target rank " + std::to_string(target_rank) +
                                    " below adapter rank " + std::to_string(adapter.rank));
    if (target_rank == adapter.rank) return adapter;
    Matrix b(adapter.m(), target_rank);
    Matrix a(target_rank, adapter.n());
    for (std::size_t i = 0; i < adapter.m(); ++i)
        for (std::size_t j = 0; j < adapter.rank; ++j) b(i, j) = adapter.b(i, j);
    for (std::size_t i = 0; i < adapter.rank; ++i)
        for (std::size_t j = 0; j < adapter.n(); ++j) a(i, j) = adapter.a(i, j);
    return LoraAdapter(std::move(b), std::move(a));
}

namespace {

constexpr char kMagic[8] = {'F', 'L', 'A', 'D', 'P', 'T', '0', '1'};

nlohmann::json config_to_json(const ModelConfig& c) {
    nlohmann::json dims = nlohmann::json::array();
    for (const auto& d : c.dims) dims.push_back({d.m, d.n});
    return {{"layers", c.layers},
            {"projections", c.projections},
            {"dims", dims},
            {"bytes_per_param", c.bytes_per_param}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.layers = j.at("layers").get<std::size_t>();
    c.projections = j.at("projections").get<std::vector<std::string>>();
    for (const auto& d : j.at("dims"))
        c.dims.push_back({d.at(0).get<std::size_t>(), d.at(1).get<std::size_t>()});
    c.bytes_per_param = j.at("bytes_per_param").get<std::size_t>();
    return c;
}

void write_matrix(std::ofstream& out, const Matrix& m) {
    out.write(reinterpret_cast<const char*>(m.data().data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix read_matrix(std::ifstream& in, std::size_t rows, std::size_t cols) {
    std::vector<double> data(rows * cols);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(data.size() * sizeof(double)))
        throw truncated_payload_error("adapter container: truncated payload");
    return Matrix(rows, cols, std::move(data));
}

}  // namespace

void serialize_set(const AdapterLayerSet& set, const std::filesystem::path& path) {
    nlohmann::json entries = nlohmann::json::array();
    for (std::size_t l = 0; l < set.config.layers; ++l) {
        for (std::size_t p = 0; p < set.config.projections.size(); ++p) {
            const auto& e = set.at(l, p);
            entries.push_back({{"layer", l},
                               {"projection", p},
                               {"rank", e.rank},
                               {"m", e.m()},
                               {"n", e.n()}});
        }
    }
    nlohmann::json header = {{"config", config_to_json(set.config)}, {"entries", entries}};
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw container_error("serialize_set: cannot open " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& e : set.entries) {
        write_matrix(out, e.b);
        write_matrix(out, e.a);
    }
    if (!out) throw container_error("serialize_set: write failure on " + path.string());
}

AdapterLayerSet deserialize_set(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw container_error("deserialize_set: cannot open " + path.string());

    char magic[8];
    in.read(magic, sizeof(magic));
    if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw malformed_header_error("adapter container: malformed header (bad magic)");

    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (in.gcount() != sizeof(len))
        throw malformed_header_error("adapter container: malformed header (length)");
    std::string header_str(len, '\0');
    in.read(header_str.data(), len);
    if (in.gcount() != static_cast<std::streamsize>(len))
        throw malformed_header_error("adapter container: malformed header (truncated JSON)");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception&) {
        throw malformed_header_error("adapter container: malformed header (invalid JSON)");
    }

    AdapterLayerSet set;
    try {
        set.config = config_from_json(header.at("config"));
        for (const auto& e : header.at("entries")) {
            const std::size_t rank = e.at("rank").get<std::size_t>();
            const std::size_t m = e.at("m").get<std::size_t>();
            const std::size_t n = e.at("n").get<std::size_t>();
            const std::size_t layer = e.at("layer").get<std::size_t>();
            const std::size_t proj = e.at("projection").get<std::size_t>();
            if (layer >= set.config.layers || proj >= set.config.projections.size())
                throw dimension_inconsistency_error(
                    "adapter container: entry index out of range");
            const auto& d = set.config.dims_at(layer, proj);
            if (m != d.m || n != d.n)
                throw dimension_inconsistency_error(
                    "adapter container: entry dims disagree with config");
            Matrix b = read_matrix(in, m, rank);
            Matrix a = read_matrix(in, rank, n);
            set.entries.emplace_back(std::move(b), std::move(a));
        }
    } catch (const nlohmann::json::exception&) {
        throw malformed_header_error("adapter container: malformed header (missing fields)");
    }
    if (set.entries.size() != set.config.entry_count())
        throw dimension_inconsistency_error("adapter container: entry count disagrees");
    return set;
}

std::size_t set_param_count(const AdapterLayerSet& set) {
    std::size_t total = 0;
    for (const auto& e : set.entries) total += e.b.size() + e.a.size();
    return total;
}

}  // namespace florist
