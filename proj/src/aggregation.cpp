#include "florist/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace florist {

std::string method_name(Method m) {
    switch (m) {
        case Method::FullFT: return "fullft";
        case Method::FedIT: return "fedit";
        case Method::FFALoRA: return "ffa-lora";
        case Method::FLoRA: return "flora";
        case Method::FlexLoRA: return "flexlora";
        case Method::FLoRIST: return "florist";
    }
    return "?";
}

std::optional<Method> parse_method(const std::string& name) {
    if (name == "fullft" || name == "full-ft") return Method::FullFT;
    if (name == "fedit") return Method::FedIT;
    if (name == "ffa-lora" || name == "ffa" || name == "ffalora") return Method::FFALoRA;
    if (name == "flora") return Method::FLoRA;
    if (name == "flexlora") return Method::FlexLoRA;
    if (name == "florist") return Method::FLoRIST;
    return std::nullopt;
}

void ThresholdPolicy::validate() const {
    if (!(tau > 0.0) || tau > 1.0)
        throw std::invalid_argument("tau must be in (0, 1], got " + std::to_string(tau));
}

namespace {

void check_cohort(const std::vector<LoraAdapter>& adapters, const std::vector<double>& weights) {
    if (adapters.empty()) throw std::invalid_argument("aggregation: empty cohort");
    if (weights.size() != adapters.size())
        throw std::invalid_argument("aggregation: weights length mismatch");
    double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("aggregation: weights must sum to 1");
}

}  // namespace

LoraAdapter fedit_aggregate(const std::vector<LoraAdapter>& adapters,
                            const std::vector<double>& weights) {
    check_cohort(adapters, weights);
    const std::size_t r = adapters.front().rank;
    for (const auto& ad : adapters) {
        if (ad.rank != r)
            throw std::invalid_argument(
                "fedit_aggregate: heterogeneous ranks; zero_pad the cohort to a common rank "
                "first");
        if (ad.m() != adapters.front().m() || ad.n() != adapters.front().n())
            throw dimension_error("fedit_aggregate: adapter dims differ");
    }
    Matrix b(adapters.front().m(), r);
    Matrix a(r, adapters.front().n());
    for (std::size_t k = 0; k < adapters.size(); ++k) {
        axpy(b, weights[k], adapters[k].b);
        axpy(a, weights[k], adapters[k].a);
    }
    return LoraAdapter(std::move(b), std::move(a));
}

LoraAdapter ffa_aggregate(const std::vector<Matrix>& b_list, const std::vector<double>& weights,
                          const Matrix& a_init) {
    if (b_list.empty()) throw std::invalid_argument("ffa_aggregate: empty cohort");
    if (weights.size() != b_list.size())
        throw std::invalid_argument("ffa_aggregate: weights length mismatch");
    for (const auto& b : b_list)
        if (!b.same_shape(b_list.front()))
            throw dimension_error("ffa_aggregate: B shapes differ across clients");
    if (b_list.front().cols() != a_init.rows())
        throw dimension_error("ffa_aggregate: a_init rank does not match B");

    Matrix b(b_list.front().rows(), b_list.front().cols());
    for (std::size_t k = 0; k < b_list.size(); ++k) axpy(b, weights[k], b_list[k]);
    return LoraAdapter(std::move(b), a_init);
}

StackedPair flora_aggregate(const std::vector<LoraAdapter>& adapters,
                            const std::vector<double>& weights) {
    return stack(adapters, weights);
}

Matrix oracle_delta_w(const std::vector<LoraAdapter>& adapters,
                      const std::vector<double>& weights) {
    check_cohort(adapters, weights);
    Matrix sum(adapters.front().m(), adapters.front().n());
    for (std::size_t k = 0; k < adapters.size(); ++k) {
        if (adapters[k].m() != sum.rows() || adapters[k].n() != sum.cols())
            throw dimension_error("oracle_delta_w: adapter dims differ");
        axpy(sum, weights[k], adapters[k].product());
    }
    return sum;
}

FlexLoraOutput flexlora_aggregate(const std::vector<LoraAdapter>& adapters,
                                  const std::vector<double>& weights,
                                  const std::vector<std::size_t>& client_ranks) {
    check_cohort(adapters, weights);
    const Matrix delta = oracle_delta_w(adapters, weights);
    const SvdFactors f = thin_svd(delta);

    FlexLoraOutput out;
    for (std::size_t k = 0; k < client_ranks.size(); ++k) {
        const std::size_t rk = std::min(client_ranks[k], f.s.size());
        // B = U[:, :rk] * diag(S[:rk]), A = Vt[:rk, :]
        Matrix b(delta.rows(), rk);
        for (std::size_t i = 0; i < delta.rows(); ++i)
            for (std::size_t j = 0; j < rk; ++j) b(i, j) = f.u(i, j) * f.s[j];
        Matrix a(rk, delta.cols());
        for (std::size_t i = 0; i < rk; ++i)
            for (std::size_t j = 0; j < delta.cols(); ++j) a(i, j) = f.vt(i, j);
        out.per_client.emplace(k, LoraAdapter(std::move(b), std::move(a)));
    }
    return out;
}

std::size_t energy_rank(const std::vector<double>& s, double tau) {
    if (!(tau > 0.0) || tau > 1.0)
        throw std::invalid_argument("energy_rank: tau must be in (0, 1]");
    double prev = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (double v : s) {
        if (v < 0.0 || v > prev)
            throw std::invalid_argument("energy_rank: s must be non-increasing, non-negative");
        prev = v;
        total += v * v;
    }
    if (total == 0.0) return 0;
    double prefix = 0.0;
    for (std::size_t p = 0; p < s.size(); ++p) {
        prefix += s[p] * s[p];
        if (prefix / total >= tau) return p + 1;
    }
    return s.size();
}

namespace {

FloristDetail florist_impl(const std::vector<LoraAdapter>& adapters,
                           const std::vector<double>& weights, const ThresholdPolicy& policy) {
    policy.validate();
    const StackedPair sp = stack(adapters, weights);
    const std::size_t m = sp.b_stack.rows();
    const std::size_t n = sp.a_stack.cols();
    const std::size_t r = sp.total_rank;

    const SvdFactors fb = thin_svd(sp.b_stack);  // m x r -> u: m x qb, vt: qb x r
    const SvdFactors fa = thin_svd(sp.a_stack);  // r x n -> u: r x qa, vt: qa x n
    const std::size_t qb = fb.s.size();
    const std::size_t qa = fa.s.size();

    // Q = V_B^T * U_A, then P = S_B Q S_A via row/column scalings.
    Matrix p = matmul(fb.vt, fa.u);  // qb x qa
    for (std::size_t i = 0; i < qb; ++i)
        for (std::size_t j = 0; j < qa; ++j) p(i, j) *= fb.s[i] * fa.s[j];

    const SvdFactors fp = thin_svd(p);  // u: qb x q, vt: q x qa
    const std::size_t rank_p = energy_rank(fp.s, policy.tau);

    double total_energy = 0.0, kept_energy = 0.0;
    for (std::size_t i = 0; i < fp.s.size(); ++i) {
        total_energy += fp.s[i] * fp.s[i];
        if (i < rank_p) kept_energy += fp.s[i] * fp.s[i];
    }

    GlobalAdapter g;
    g.rank = rank_p;
    g.tau = policy.tau;
    g.energy_retained = total_energy > 0.0 ? kept_energy / total_energy : 1.0;

    if (rank_p == 0) {
        g.b_g = Matrix(m, 0);
        g.a_g = Matrix(0, n);
        return {std::move(g), fp.s};
    }

    // B_g = (U_B * U_P)[:, :p] * diag(S_P[:p]): truncate U_P first so the
    // products stay m x p and p x n.
    Matrix up_trunc(qb, rank_p);
    for (std::size_t i = 0; i < qb; ++i)
        for (std::size_t j = 0; j < rank_p; ++j) up_trunc(i, j) = fp.u(i, j);
    g.b_g = matmul(fb.u, up_trunc);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < rank_p; ++j) g.b_g(i, j) *= fp.s[j];

    Matrix vpt_trunc(rank_p, qa);
    for (std::size_t i = 0; i < rank_p; ++i)
        for (std::size_t j = 0; j < qa; ++j) vpt_trunc(i, j) = fp.vt(i, j);
    g.a_g = matmul(vpt_trunc, fa.vt);

    (void)r;
    return {std::move(g), fp.s};
}

}  // namespace

GlobalAdapter florist_aggregate(const std::vector<LoraAdapter>& adapters,
                                const std::vector<double>& weights,
                                const ThresholdPolicy& policy) {
    return florist_impl(adapters, weights, policy).global;
}

FloristDetail florist_aggregate_detailed(const std::vector<LoraAdapter>& adapters,
                                         const std::vector<double>& weights,
                                         const ThresholdPolicy& policy) {
    return florist_impl(adapters, weights, policy);
}

ModelAggregate aggregate_model(Method method, const std::vector<AdapterLayerSet>& sets,
                               const std::vector<ClientConfig>& clients,
                               const ThresholdPolicy& policy,
                               const std::vector<Matrix>* a_init_per_entry) {
    if (sets.empty()) throw std::invalid_argument("aggregate_model: no client sets");
    if (sets.size() != clients.size())
        throw std::invalid_argument("aggregate_model: client count mismatch");
    for (const auto& s : sets)
        if (!(s.config == sets.front().config))
            throw std::invalid_argument("aggregate_model: client configs differ");

    const std::vector<double> weights = cohort_weights(clients);
    const std::size_t entries = sets.front().config.entry_count();
    std::size_t max_rank = 0;
    for (const auto& c : clients) max_rank = std::max(max_rank, c.rank);

    ModelAggregate out;
    out.method = method;
    out.per_entry_rank.assign(entries, 0);
    switch (method) {
        case Method::FedIT:
        case Method::FFALoRA: out.averaged.resize(entries); break;
        case Method::FLoRA: out.stacked.resize(entries); break;
        case Method::FlexLoRA: out.flex.resize(entries); break;
        case Method::FLoRIST:
            out.global.resize(entries);
            out.spectra.resize(entries);
            break;
        case Method::FullFT:
            throw std::invalid_argument("aggregate_model: FullFT has no adapter aggregation");
    }
    if (method == Method::FFALoRA &&
        (a_init_per_entry == nullptr || a_init_per_entry->size() != entries))
        throw std::invalid_argument("aggregate_model: FFA-LoRA requires a_init per entry");

    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ei = 0; ei < static_cast<std::ptrdiff_t>(entries); ++ei) {
        try {
        const std::size_t e = static_cast<std::size_t>(ei);
        std::vector<LoraAdapter> cohort;
        cohort.reserve(sets.size());
        for (const auto& s : sets) cohort.push_back(s.entries[e]);

        switch (method) {
            case Method::FedIT: {
                std::vector<LoraAdapter> padded;
                for (const auto& ad : cohort) padded.push_back(zero_pad(ad, max_rank));
                out.averaged[e] = fedit_aggregate(padded, weights);
                out.per_entry_rank[e] = max_rank;
                break;
            }
            case Method::FFALoRA: {
                std::vector<Matrix> b_list;
                for (const auto& ad : cohort) b_list.push_back(zero_pad(ad, max_rank).b);
                out.averaged[e] = ffa_aggregate(b_list, weights, (*a_init_per_entry)[e]);
                out.per_entry_rank[e] = max_rank;
                break;
            }
            case Method::FLoRA: {
                out.stacked[e] = flora_aggregate(cohort, weights);
                out.per_entry_rank[e] = out.stacked[e].total_rank;
                break;
            }
            case Method::FlexLoRA: {
                std::vector<std::size_t> ranks;
                for (const auto& c : clients) ranks.push_back(c.rank);
                out.flex[e] = flexlora_aggregate(cohort, weights, ranks);
                out.per_entry_rank[e] = max_rank;
                break;
            }
            case Method::FLoRIST: {
                FloristDetail d = florist_aggregate_detailed(cohort, weights, policy);
                out.per_entry_rank[e] = d.global.rank;
                out.global[e] = std::move(d.global);
                out.spectra[e] = std::move(d.spectrum);
                break;
            }
            case Method::FullFT: break;
        }
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace florist
