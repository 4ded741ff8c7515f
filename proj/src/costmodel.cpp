#include "florist/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace florist {

void CostScenario::validate() const {
    model.validate();
    if (clients.empty()) throw std::invalid_argument("CostScenario: empty cohort");
    if (method == Method::FLoRIST) {
        if (!per_entry_p)
            throw std::invalid_argument("CostScenario: per_entry_p required for this method");
        if (per_entry_p->size() != model.entry_count())
            throw std::invalid_argument("CostScenario: per_entry_p length mismatch");
    }
}

double CostReport::upload_mb(std::size_t bytes_per_param) const {
    return static_cast<double>(upload_params) * static_cast<double>(bytes_per_param) /
           (1024.0 * 1024.0);
}

double CostReport::download_mb(std::size_t bytes_per_param) const {
    return static_cast<double>(download_params) * static_cast<double>(bytes_per_param) /
           (1024.0 * 1024.0);
}

namespace {

struct ScenarioSums {
    std::size_t k = 0;
    std::size_t max_rank = 0;
    std::size_t sum_rank = 0;        // r = sum_k r_k
    std::size_t sum_mn = 0;          // sum over entries of m*n
    std::size_t sum_m_plus_n = 0;    // sum over entries of m+n
    std::size_t sum_m = 0;
    std::size_t sum_n = 0;
};

ScenarioSums summarize(const CostScenario& s) {
    ScenarioSums t;
    t.k = s.clients.size();
    for (const auto& c : s.clients) {
        t.max_rank = std::max(t.max_rank, c.rank);
        t.sum_rank += c.rank;
    }
    for (const auto& d : s.model.dims) {
        t.sum_mn += d.m * d.n;
        t.sum_m_plus_n += d.m + d.n;
        t.sum_m += d.m;
        t.sum_n += d.n;
    }
    return t;
}

std::size_t florist_download_per_client(const CostScenario& s) {
    std::size_t total = 0;
    for (std::size_t e = 0; e < s.model.dims.size(); ++e)
        total += (*s.per_entry_p)[e] * (s.model.dims[e].m + s.model.dims[e].n);
    return total;
}

}  // namespace

CommCost comm_cost(const CostScenario& scenario) {
    scenario.validate();
    const ScenarioSums t = summarize(scenario);
    CommCost c;
    switch (scenario.method) {
        case Method::FullFT:
            c.upload_params = t.k * t.sum_mn;
            c.download_params = t.k * t.sum_mn;
            break;
        case Method::FedIT:
            // zero-padding baseline: every client transmits at max rank
            c.upload_params = t.k * t.max_rank * t.sum_m_plus_n;
            c.download_params = t.k * t.max_rank * t.sum_m_plus_n;
            break;
        case Method::FFALoRA:
            c.upload_params = t.k * t.max_rank * t.sum_m;
            c.download_params = t.k * t.max_rank * t.sum_m;
            c.one_time_download_params = t.k * t.max_rank * t.sum_n;
            break;
        case Method::FLoRA:
            c.upload_params = t.sum_rank * t.sum_m_plus_n;
            c.download_params = t.k * t.sum_rank * t.sum_m_plus_n;
            break;
        case Method::FlexLoRA:
            c.upload_params = t.sum_rank * t.sum_m_plus_n;
            c.download_params = t.sum_rank * t.sum_m_plus_n;
            break;
        case Method::FLoRIST:
            c.upload_params = t.sum_rank * t.sum_m_plus_n;
            c.download_params = t.k * florist_download_per_client(scenario);
            break;
    }
    return c;
}

double flops_estimate(const CostScenario& scenario) {
    scenario.validate();
    const ScenarioSums t = summarize(scenario);
    const double c_svd = scenario.svd_flop_constant;
    const double r = static_cast<double>(t.sum_rank);

    auto svd_flops = [c_svd](double d1, double d2) {
        const double lo = std::min(d1, d2), hi = std::max(d1, d2);
        return c_svd * hi * lo * lo;
    };

    double total = 0.0;
    for (std::size_t e = 0; e < scenario.model.dims.size(); ++e) {
        const double m = static_cast<double>(scenario.model.dims[e].m);
        const double n = static_cast<double>(scenario.model.dims[e].n);
        switch (scenario.method) {
            case Method::FullFT:
                total += 2.0 * t.k * m * n;  // weighted averaging of dense updates
                break;
            case Method::FedIT:
                total += 2.0 * t.k * t.max_rank * (m + n);
                break;
            case Method::FFALoRA:
                total += 2.0 * t.k * t.max_rank * m;
                break;
            case Method::FLoRA:
                break;  // server only concatenates
            case Method::FlexLoRA: {
                for (const auto& cl : scenario.clients) total += 2.0 * m * cl.rank * n;
                total += svd_flops(m, n);
                total += r * (m + n);  // per-client truncation copies
                break;
            }
            case Method::FLoRIST: {
                const double qb = std::min(m, r), qa = std::min(n, r);
                const double p = static_cast<double>((*scenario.per_entry_p)[e]);
                total += svd_flops(m, r) + svd_flops(n, r);
                total += 2.0 * qb * r * qa;  // Q = V_B^T U_A
                total += 2.0 * qb * qa;      // diagonal row/column scalings
                total += svd_flops(qb, qa);  // SVD of P
                total += 2.0 * (m + n) * r * p;  // global adapter construction
                break;
            }
        }
    }
    return total;
}

MemoryCost memory_cost(const CostScenario& scenario) {
    scenario.validate();
    const ScenarioSums t = summarize(scenario);
    MemoryCost mc;
    const std::size_t base = t.sum_mn;  // frozen model copy on each client
    switch (scenario.method) {
        case Method::FullFT:
            mc.client_peak_params = base;
            mc.server_peak_params = t.k * t.sum_mn;
            break;
        case Method::FedIT:
            mc.client_peak_params = base + 2 * t.max_rank * t.sum_m_plus_n;
            mc.server_peak_params = t.k * t.max_rank * t.sum_m_plus_n;
            break;
        case Method::FFALoRA:
            mc.client_peak_params =
                base + t.max_rank * t.sum_m_plus_n + t.max_rank * t.sum_m;
            mc.server_peak_params = t.k * t.max_rank * t.sum_m;
            break;
        case Method::FLoRA:
            mc.client_peak_params =
                base + t.max_rank * t.sum_m_plus_n + t.sum_rank * t.sum_m_plus_n;
            mc.server_peak_params = t.sum_rank * t.sum_m_plus_n;
            break;
        case Method::FlexLoRA: {
            mc.client_peak_params = base + 2 * t.max_rank * t.sum_m_plus_n;
            // dense aggregate per entry plus SVD workspace plus truncations
            std::size_t server = 0;
            for (const auto& d : scenario.model.dims)
                server += d.m * d.n + d.m * d.m + d.n * d.n + d.m * d.n;
            server += t.sum_rank * t.sum_m_plus_n;
            mc.server_peak_params = server;
            break;
        }
        case Method::FLoRIST: {
            std::size_t p_total = 0;
            for (std::size_t e = 0; e < scenario.model.dims.size(); ++e)
                p_total += (*scenario.per_entry_p)[e] *
                           (scenario.model.dims[e].m + scenario.model.dims[e].n);
            mc.client_peak_params = base + t.max_rank * t.sum_m_plus_n + p_total;
            // stacked factors + r x r intermediates + global adapter; no m*n term
            mc.server_peak_params = t.sum_rank * t.sum_m_plus_n +
                                    3 * t.sum_rank * t.sum_rank *
                                        scenario.model.entry_count() +
                                    p_total;
            break;
        }
    }
    return mc;
}

double efficiency(std::size_t total_rank) {
    if (total_rank == 0) throw std::invalid_argument("efficiency: total rank is zero");
    return 1.0 / static_cast<double>(total_rank);
}

std::size_t scenario_total_rank(const CostScenario& scenario) {
    scenario.validate();
    const ScenarioSums t = summarize(scenario);
    const std::size_t entries = scenario.model.entry_count();
    switch (scenario.method) {
        case Method::FullFT: {
            std::size_t total = 0;
            for (const auto& d : scenario.model.dims) total += std::min(d.m, d.n);
            return total;
        }
        case Method::FedIT:
        case Method::FFALoRA:
        case Method::FlexLoRA: return entries * t.max_rank;
        case Method::FLoRA: return entries * t.sum_rank;
        case Method::FLoRIST: {
            std::size_t total = 0;
            for (std::size_t p : *scenario.per_entry_p) total += p;
            return total;
        }
    }
    return 0;
}

CostReport cost_report(const CostScenario& scenario) {
    const CommCost cc = comm_cost(scenario);
    const MemoryCost mc = memory_cost(scenario);
    CostReport r;
    r.method = scenario.method;
    r.clients = scenario.clients.size();
    r.upload_params = cc.upload_params;
    r.download_params = cc.download_params;
    r.one_time_download_params = cc.one_time_download_params;
    r.upload_bytes = cc.upload_params * scenario.model.bytes_per_param;
    r.download_bytes = cc.download_params * scenario.model.bytes_per_param;
    r.server_flops = flops_estimate(scenario);
    r.client_peak_params = mc.client_peak_params;
    r.server_peak_params = mc.server_peak_params;
    r.total_rank = scenario_total_rank(scenario);
    r.efficiency = r.total_rank > 0 ? 1.0 / static_cast<double>(r.total_rank) : 0.0;
    return r;
}

namespace {

CostScenario with_client_count(const CostScenario& base, std::size_t k) {
    CostScenario s = base;
    s.clients.clear();
    for (std::size_t i = 0; i < k; ++i) {
        ClientConfig c = base.clients[i % base.clients.size()];
        c.client_id = i;
        s.clients.push_back(c);
    }
    return s;
}

}  // namespace

std::vector<ScalingPoint> scaling_curve(Method method, const CostScenario& base,
                                        const std::vector<std::size_t>& client_counts) {
    for (std::size_t i = 1; i < client_counts.size(); ++i)
        if (client_counts[i] <= client_counts[i - 1])
            throw std::invalid_argument("scaling_curve: client counts must be ascending");
    std::vector<ScalingPoint> out;
    for (std::size_t k : client_counts) {
        CostScenario s = with_client_count(base, k);
        s.method = method;
        const CommCost cc = comm_cost(s);
        out.push_back({k, cc.upload_params, cc.download_params});
    }
    return out;
}

std::optional<std::size_t> flora_fullft_crossover(const CostScenario& base,
                                                  std::size_t k_limit) {
    for (std::size_t k = 1; k <= k_limit; ++k) {
        CostScenario flora = with_client_count(base, k);
        flora.method = Method::FLoRA;
        CostScenario fullft = flora;
        fullft.method = Method::FullFT;
        if (comm_cost(flora).download_params > comm_cost(fullft).download_params) return k;
    }
    return std::nullopt;
}

}  // namespace florist
