#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsat/core/matrix.hpp"
#include "gsat/core/rng.hpp"
#include "gsat/core/tape.hpp"
#include "gsat/graph/graph.hpp"

namespace gsat {

/// Binary matrix emitted at one time step, either by the encoder (n x d')
/// or by the firing function (n x 2).
class SpikeTrainStep {
public:
    SpikeTrainStep() = default;
    SpikeTrainStep(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::uint8_t operator()(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c]; }
    void set(std::size_t r, std::size_t c, bool on) { bits_[r * cols_ + c] = on ? 1 : 0; }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    std::size_t count_ones() const {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }

    friend bool operator==(const SpikeTrainStep&, const SpikeTrainStep&) = default;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// One coefficient per directed edge slot of a Graph, CSR-aligned.
struct EdgeAttention {
    std::vector<double> coefficients;

    std::size_t size() const noexcept { return coefficients.size(); }
    friend bool operator==(const EdgeAttention&, const EdgeAttention&) = default;
};

struct IFNeuronState {
    DenseMatrix potential;  // n x 2
    double mu = 1.0;

    static IFNeuronState rest(std::size_t n, double mu) { return {DenseMatrix(n, 2), mu}; }
};

enum class ResetMode {
    on_fire,        // V -= mu only where the neuron fired
    unconditional,  // V -= mu everywhere, every step
};

enum class SurrogateKind { rectangle, sigmoid };

/// Backward rule for the heaviside firing function.
struct Surrogate {
    SurrogateKind kind = SurrogateKind::rectangle;
    double width = 0.5;  // rectangle: derivative 1 where |V - mu| <= width
    double slope = 4.0;  // sigmoid: derivative of sigmoid(slope * x)

    double derivative(double x) const {
        if (kind == SurrogateKind::rectangle) return std::abs(x) <= width ? 1.0 : 0.0;
        const double s = 1.0 / (1.0 + std::exp(-slope * x));
        return slope * s * (1.0 - s);
    }
};

struct SpikingAttentionParams {
    std::vector<DenseMatrix> theta_steps;  // T matrices of d' x 2, or one when shared
    double mu = 0.5;
    std::size_t T = 8;
    bool share_theta = false;
    ResetMode reset = ResetMode::on_fire;

    const DenseMatrix& theta_at(std::size_t t) const { return share_theta ? theta_steps.front() : theta_steps.at(t); }

    void validate() const {
        if (T == 0) throw std::invalid_argument("spiking attention: T must be >= 1");
        if (mu < 0.0) throw std::invalid_argument("spiking attention: mu must be >= 0");
        const std::size_t expect = share_theta ? 1 : T;
        if (theta_steps.size() != expect)
            throw std::invalid_argument("spiking attention: expected " + std::to_string(expect) +
                                        " theta matrices, got " + std::to_string(theta_steps.size()));
        for (const auto& th : theta_steps) {
            if (th.cols() != 2 || th.rows() != theta_steps.front().rows())
                throw std::invalid_argument("spiking attention: every theta must be d'x2 with equal d'");
        }
    }
};

/// Spike counts recorded by one forward pass; the FLOPs counter consumes it.
struct SpikingTrace {
    std::size_t T = 0;
    std::size_t n = 0;
    std::size_t width = 0;                      // d'
    std::vector<std::size_t> input_spikes;      // nnz(Z^(t)) per step
    std::vector<std::size_t> output_spikes;     // nnz(S^(t)) per step
};

/// Rate encoder: one uniform p in (0, 1] per entry, spike iff h >= p.
/// Spike probability is exactly clamp(h, 0, 1).
inline SpikeTrainStep poisson_encode(const DenseMatrix& h, Rng& rng) {
    SpikeTrainStep z(h.rows(), h.cols());
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = 0; j < h.cols(); ++j) z.set(i, j, h(i, j) >= rng.uniform_open_closed());
    return z;
}

/// V += Z * theta. Only the ones in Z contribute.
inline IFNeuronState if_charge(IFNeuronState state, const SpikeTrainStep& z, const DenseMatrix& theta) {
    if (z.cols() != theta.rows() || theta.cols() != state.potential.cols() || z.rows() != state.potential.rows())
        throw std::invalid_argument("if_charge: shape mismatch, V " + state.potential.shape_str() + ", Z " +
                                    std::to_string(z.rows()) + "x" + std::to_string(z.cols()) + ", theta " +
                                    theta.shape_str());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto v = state.potential.row(i);
        for (std::size_t k = 0; k < z.cols(); ++k) {
            if (!z(i, k)) continue;
            auto th = theta.row(k);
            for (std::size_t c = 0; c < v.size(); ++c) v[c] += th[c];
        }
    }
    return state;
}

/// Heaviside of V - mu, inclusive at the threshold.
inline SpikeTrainStep if_fire(const IFNeuronState& state) {
    const auto& v = state.potential;
    SpikeTrainStep s(v.rows(), v.cols());
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t c = 0; c < v.cols(); ++c) s.set(i, c, v(i, c) - state.mu >= 0.0);
    return s;
}

/// Soft reset.
inline IFNeuronState if_reset(IFNeuronState state, const SpikeTrainStep& fired,
                              ResetMode mode = ResetMode::on_fire) {
    auto& v = state.potential;
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t c = 0; c < v.cols(); ++c)
            if (mode == ResetMode::unconditional || fired(i, c)) v(i, c) -= state.mu;
    return state;
}

/// Mean over time steps. Entries are multiples of 1/T.
inline DenseMatrix spike_average(std::span<const SpikeTrainStep> steps) {
    if (steps.empty()) throw std::invalid_argument("spike_average: need at least one step");
    const auto rows = steps.front().rows();
    const auto cols = steps.front().cols();
    std::vector<std::uint32_t> counts(rows * cols, 0);
    for (const auto& s : steps) {
        if (s.rows() != rows || s.cols() != cols) throw std::invalid_argument("spike_average: step shape mismatch");
        for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += s.bits()[k];
    }
    DenseMatrix out(rows, cols);
    const double T = static_cast<double>(steps.size());
    for (std::size_t k = 0; k < counts.size(); ++k) out.data()[k] = static_cast<double>(counts[k]) / T;
    return out;
}

/// alpha(i -> j) = s[i,0] + s[j,1], evaluated on edge slots only.
inline EdgeAttention attention_scores(const DenseMatrix& s, const Graph& g) {
    if (s.rows() != g.num_nodes() || s.cols() != 2)
        throw std::invalid_argument("attention_scores: expected " + std::to_string(g.num_nodes()) + "x2, got " +
                                    s.shape_str());
    EdgeAttention a;
    a.coefficients.resize(g.num_edge_slots());
    for (std::size_t e = 0; e < g.num_edge_slots(); ++e) a.coefficients[e] = s(g.src(e), 0) + s(g.dst(e), 1);
    return a;
}

namespace detail {

struct NormSums {
    std::vector<double> row, col;
};

inline NormSums attention_sums(std::span<const double> alpha, const Graph& g) {
    NormSums s{std::vector<double>(g.num_nodes(), 0.0), std::vector<double>(g.num_nodes(), 0.0)};
    for (std::size_t e = 0; e < alpha.size(); ++e) {
        s.row[g.src(e)] += alpha[e];
        s.col[g.dst(e)] += alpha[e];
    }
    return s;
}

inline std::vector<double> normalize_with(std::span<const double> alpha, const Graph& g, const NormSums& s) {
    std::vector<double> out(alpha.size(), 0.0);
    for (std::size_t e = 0; e < alpha.size(); ++e) {
        const double r = s.row[g.src(e)];
        const double c = s.col[g.dst(e)];
        out[e] = (r > 0.0 && c > 0.0) ? alpha[e] / (std::sqrt(r) * std::sqrt(c)) : 0.0;
    }
    return out;
}

}  // namespace detail

/// alpha'_ij = alpha_ij / (sqrt(row sum of i) * sqrt(column sum of j)).
/// Coefficients whose row or column sum is zero are defined as 0.
inline EdgeAttention symmetric_normalize(const EdgeAttention& alpha, const Graph& g) {
    if (alpha.size() != g.num_edge_slots())
        throw std::invalid_argument("symmetric_normalize: coefficient count != edge slots");
    for (std::size_t e = 0; e < alpha.size(); ++e)
        if (alpha.coefficients[e] < 0.0)
            throw std::invalid_argument("symmetric_normalize: negative coefficient at slot " + std::to_string(e));
    const auto sums = detail::attention_sums(alpha.coefficients, g);
    return EdgeAttention{detail::normalize_with(alpha.coefficients, g, sums)};
}

/// Full record of one spiking pass, kept for the surrogate backward.
struct SpikingRun {
    std::vector<SpikeTrainStep> inputs;   // Z^(t), only when history is kept
    std::vector<DenseMatrix> pre_reset;   // V^(t) after charging, before reset; only with history
    std::vector<std::size_t> input_spikes;
    std::vector<SpikeTrainStep> fires;    // S^(t)
    DenseMatrix average;                  // S
};

/// Encode -> charge -> fire -> reset, T times, starting from V = 0.
inline SpikingRun run_spiking(const DenseMatrix& h, const SpikingAttentionParams& p, Rng& rng, bool keep_history) {
    p.validate();
    if (h.cols() != p.theta_steps.front().rows())
        throw std::invalid_argument("spiking attention: h has " + std::to_string(h.cols()) + " columns, theta expects " +
                                    std::to_string(p.theta_steps.front().rows()));
    SpikingRun run;
    auto state = IFNeuronState::rest(h.rows(), p.mu);
    for (std::size_t t = 0; t < p.T; ++t) {
        auto z = poisson_encode(h, rng);
        state = if_charge(std::move(state), z, p.theta_at(t));
        auto fired = if_fire(state);
        run.input_spikes.push_back(z.count_ones());
        if (keep_history) {
            run.pre_reset.push_back(state.potential);
            run.inputs.push_back(std::move(z));
        }
        state = if_reset(std::move(state), fired, p.reset);
        run.fires.push_back(std::move(fired));
    }
    run.average = spike_average(run.fires);
    return run;
}

inline SpikingTrace trace_of(const SpikingRun& run, std::size_t width) {
    SpikingTrace tr;
    tr.T = run.fires.size();
    tr.n = run.average.rows();
    tr.width = width;
    tr.input_spikes = run.input_spikes;
    for (const auto& f : run.fires) tr.output_spikes.push_back(f.count_ones());
    return tr;
}

/// Algorithm: spiking encode/IF loop, spike averaging, edge scores, symmetric normalization.
inline EdgeAttention spiking_attention(const DenseMatrix& h, const SpikingAttentionParams& p, const Graph& g,
                                       Rng& rng) {
    if (h.rows() != g.num_nodes())
        throw std::invalid_argument("spiking_attention: h rows " + std::to_string(h.rows()) + " != n " +
                                    std::to_string(g.num_nodes()));
    const auto run = run_spiking(h, p, rng, false);
    return symmetric_normalize(attention_scores(run.average, g), g);
}

namespace ad {

/// Spiking edge scores on the tape (raw alpha, m x 1, before normalization).
///
/// Backward: the heaviside uses `surrogate`; the reset is treated as a
/// constant shift; the encoder passes gradient 1 where 0 < h < 1 and 0
/// elsewhere (straight-through clamp).
inline Var spiking_scores(Tape& tape, Var h, const std::vector<Var>& thetas, const SpikingAttentionParams& shape,
                          const Surrogate& surrogate, const Graph& g, Rng& rng, SpikingTrace* trace = nullptr) {
    SpikingAttentionParams p = shape;
    p.theta_steps.clear();
    for (const Var th : thetas) p.theta_steps.push_back(tape.value(th));
    const DenseMatrix& hv = tape.value(h);
    if (hv.rows() != g.num_nodes())
        throw std::invalid_argument("spiking_scores: h rows != node count");

    bool need_grad = tape.requires_grad(h);
    for (const Var th : thetas) need_grad = need_grad || tape.requires_grad(th);
    auto run = std::make_shared<SpikingRun>(run_spiking(hv, p, rng, need_grad));
    if (trace) *trace = trace_of(*run, hv.cols());

    const EdgeAttention a = attention_scores(run->average, g);
    DenseMatrix out(a.size(), 1, a.coefficients);

    std::vector<Var> parents{h};
    parents.insert(parents.end(), thetas.begin(), thetas.end());
    return tape.push(std::move(out), parents,
                     [h, thetas, run, p, surrogate, &g](Tape& t, const DenseMatrix& grad) {
                         const std::size_t n = g.num_nodes();
                         const std::size_t T = p.T;
                         // dL/dS for the averaged spike matrix.
                         DenseMatrix d_avg(n, 2);
                         for (std::size_t e = 0; e < g.num_edge_slots(); ++e) {
                             d_avg(g.src(e), 0) += grad(e, 0);
                             d_avg(g.dst(e), 1) += grad(e, 0);
                         }
                         d_avg *= 1.0 / static_cast<double>(T);

                         const DenseMatrix& hv = t.value(h);
                         DenseMatrix d_h(hv.rows(), hv.cols());
                         DenseMatrix d_v_next(n, 2);  // dL/dV carried from step t+1
                         for (std::size_t step = T; step-- > 0;) {
                             const auto& pre = run->pre_reset[step];
                             DenseMatrix d_u = d_v_next;
                             for (std::size_t i = 0; i < n; ++i)
                                 for (std::size_t c = 0; c < 2; ++c)
                                     d_u(i, c) += d_avg(i, c) * surrogate.derivative(pre(i, c) - p.mu);

                             const auto& z = run->inputs[step];
                             const Var th = p.share_theta ? thetas.front() : thetas[step];
                             if (DenseMatrix* buf = t.grad_buffer(th)) {
                                 for (std::size_t i = 0; i < n; ++i)
                                     for (std::size_t k = 0; k < z.cols(); ++k)
                                         if (z(i, k)) {
                                             (*buf)(k, 0) += d_u(i, 0);
                                             (*buf)(k, 1) += d_u(i, 1);
                                         }
                             }
                             if (t.requires_grad(h)) {
                                 const DenseMatrix& theta = p.theta_at(step);
                                 for (std::size_t i = 0; i < n; ++i)
                                     for (std::size_t k = 0; k < hv.cols(); ++k) {
                                         const double x = hv(i, k);
                                         if (x <= 0.0 || x >= 1.0) continue;
                                         d_h(i, k) += d_u(i, 0) * theta(k, 0) + d_u(i, 1) * theta(k, 1);
                                     }
                             }
                             d_v_next = std::move(d_u);
                         }
                         t.accumulate(h, d_h);
                     });
}

/// Symmetric normalization on the tape. Zero row/column sums give zero output and zero gradient.
inline Var symmetric_normalize(Tape& tape, Var alpha, const Graph& g) {
    const auto& a = tape.value(alpha);
    if (a.rows() != g.num_edge_slots() || a.cols() != 1)
        throw std::invalid_argument("symmetric_normalize: expected m x 1 coefficients");
    for (const double v : a.data())
        if (v < 0.0) throw std::invalid_argument("symmetric_normalize: negative coefficient");
    auto sums = detail::attention_sums(a.data(), g);
    auto normed = detail::normalize_with(a.data(), g, sums);
    DenseMatrix out(normed.size(), 1, normed);
    return tape.push(std::move(out), {alpha},
                     [alpha, &g, sums = std::move(sums), normed = std::move(normed)](Tape& t, const DenseMatrix& grad) {
                         const auto& a = t.value(alpha);
                         const std::size_t n = g.num_nodes();
                         std::vector<double> d_row(n, 0.0), d_col(n, 0.0);
                         for (std::size_t e = 0; e < normed.size(); ++e) {
                             d_row[g.src(e)] += grad(e, 0) * normed[e];
                             d_col[g.dst(e)] += grad(e, 0) * normed[e];
                         }
                         DenseMatrix d(a.rows(), 1);
                         for (std::size_t e = 0; e < normed.size(); ++e) {
                             const double r = sums.row[g.src(e)];
                             const double c = sums.col[g.dst(e)];
                             if (r <= 0.0 || c <= 0.0) continue;
                             d(e, 0) = grad(e, 0) / (std::sqrt(r) * std::sqrt(c)) - 0.5 * d_row[g.src(e)] / r -
                                       0.5 * d_col[g.dst(e)] / c;
                         }
                         t.accumulate(alpha, d);
                     });
}

}  // namespace ad
}  // namespace gsat
