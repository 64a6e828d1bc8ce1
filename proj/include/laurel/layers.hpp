#pragma once

// Learned augmented residual combinations: the residual-weights (RW),
// low-rank (LR) and previous-activations (PA) variants and their
// compositions, plus closed-form added-parameter counts and deterministic
// initialization.
//
// Conventions: activations are row-batches [b x D]. The low-rank factors
// keep their natural shapes A [D x r], B [r x D]; a D x D matrix is never
// materialized. For combined variants the composition order is fixed:
// RW scalars weight f(x_i) and x_i, then the LR term is added, then the
// PA history sum.

#include <array>
#include <cstdint>
#include <iostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "laurel/tensor.hpp"

namespace laurel {

enum class VariantKind { Vanilla, RW, LR, PA, RW_LR, RW_LR_PA };

struct ResidualVariant {
    VariantKind kind = VariantKind::Vanilla;
    std::size_t rank = 0;  // meaningful when the variant carries a low-rank factor
};

inline bool has_rw(VariantKind k) {
    return k == VariantKind::RW || k == VariantKind::RW_LR || k == VariantKind::RW_LR_PA;
}
inline bool has_lr(VariantKind k) {
    return k == VariantKind::LR || k == VariantKind::RW_LR || k == VariantKind::RW_LR_PA;
}
inline bool has_pa(VariantKind k) {
    return k == VariantKind::PA || k == VariantKind::RW_LR_PA;
}
inline bool needs_rank(VariantKind k) { return has_lr(k) || has_pa(k); }

inline std::string variant_name(VariantKind k) {
    switch (k) {
        case VariantKind::Vanilla: return "vanilla";
        case VariantKind::RW: return "rw";
        case VariantKind::LR: return "lr";
        case VariantKind::PA: return "pa";
        case VariantKind::RW_LR: return "rw+lr";
        case VariantKind::RW_LR_PA: return "rw+lr+pa";
    }
    throw std::logic_error("variant_name: bad kind");
}

inline VariantKind parse_variant(const std::string& s) {
    if (s == "vanilla") return VariantKind::Vanilla;
    if (s == "rw") return VariantKind::RW;
    if (s == "lr") return VariantKind::LR;
    if (s == "pa") return VariantKind::PA;
    if (s == "rw+lr") return VariantKind::RW_LR;
    if (s == "rw+lr+pa") return VariantKind::RW_LR_PA;
    throw std::invalid_argument("unknown variant '" + s +
                                "' (expected vanilla|rw|lr|pa|rw+lr|rw+lr+pa)");
}

enum class RWNorm { SoftmaxPair, SigmoidSingle, None };

inline std::string rw_norm_name(RWNorm n) {
    switch (n) {
        case RWNorm::SoftmaxPair: return "softmax-pair";
        case RWNorm::SigmoidSingle: return "sigmoid-single";
        case RWNorm::None: return "none";
    }
    throw std::logic_error("rw_norm_name: bad mode");
}

inline RWNorm parse_rw_norm(const std::string& s) {
    if (s == "softmax-pair") return RWNorm::SoftmaxPair;
    if (s == "sigmoid-single") return RWNorm::SigmoidSingle;
    if (s == "none") return RWNorm::None;
    throw std::invalid_argument("unknown rw normalization '" + s + "'");
}

// Parameter bundles. Tensors may be tape leaves (training) or detached
// values (evaluation); the combine rules work the same either way.
struct RWParams {
    Tensor alpha_logit;  // shape [1]
    Tensor beta_logit;   // shape [1]; present but unused under sigmoid-single
    RWNorm normalization = RWNorm::SoftmaxPair;
};

struct LRParams {
    Tensor A;  // [D x r]
    Tensor B;  // [r x D]
};

struct PAParams {
    Tensor A_h;                 // [D x r], shared across blocks
    Tensor B_h;                 // [r x D], shared across blocks
    std::vector<Tensor> gamma;  // N scalars, one per source block
    bool literal_mode = false;
};

using ResidualStream = std::vector<Tensor>;  // x_0, x_1, ..., x_i

// Effective (alpha, beta) from the logits. Softmax over a pair equals
// sigmoid of the logit difference, so alpha + beta == 1 holds to rounding.
inline std::pair<Tensor, Tensor> rw_weights(const RWParams& p) {
    switch (p.normalization) {
        case RWNorm::SoftmaxPair: {
            Tensor diff = add(p.alpha_logit, scale(p.beta_logit, -1.0));
            return {sigmoid(diff), sigmoid(scale(diff, -1.0))};
        }
        case RWNorm::SigmoidSingle: {
            Tensor alpha = sigmoid(p.alpha_logit);
            return {alpha, add_const(scale(alpha, -1.0), 1.0)};
        }
        case RWNorm::None:
            return {p.alpha_logit, p.beta_logit};
    }
    throw std::logic_error("rw_weights: bad normalization");
}

// x_{i+1} = alpha * f(x_i) + beta * x_i
inline Tensor rw_combine(const Tensor& f_out, const Tensor& x_i, const RWParams& p) {
    detail::check_same_shape("rw_combine", f_out, x_i);
    auto [alpha, beta] = rw_weights(p);
    return add(mul_scalar(f_out, alpha), mul_scalar(x_i, beta));
}

// x [b x D] -> (x B^T) A^T, two rank-r products; cost O(b r D).
inline Tensor lowrank_apply(const Tensor& x, const Tensor& A, const Tensor& B) {
    return matmul(matmul(x, transpose(B)), transpose(A));
}

// x_{i+1} = f(x_i) + A B x_i + x_i  (W = A B + I, never materialized)
inline Tensor lr_combine(const Tensor& f_out, const Tensor& x_i, const LRParams& p) {
    detail::check_same_shape("lr_combine", f_out, x_i);
    const std::size_t D = x_i.shape.back();
    if (p.A.shape.size() != 2 || p.B.shape.size() != 2 || p.A.shape[0] != D ||
        p.B.shape[1] != D || p.A.shape[1] != p.B.shape[0])
        throw std::invalid_argument("lr_combine: factor shapes " + shape_str(p.A.shape) + ", " +
                                    shape_str(p.B.shape) + " do not fit width " +
                                    std::to_string(D));
    if (p.A.shape[1] > D)
        throw std::invalid_argument("lr_combine: rank " + std::to_string(p.A.shape[1]) +
                                    " exceeds width " + std::to_string(D));
    return add(add(f_out, lowrank_apply(x_i, p.A, p.B)), x_i);
}

// History mix over the residual stream. Default mode carries the identity
// term explicitly and uses the pure low-rank product as h:
//   f(x_i) + x_i + sum_{j<=i} gamma_j * (A_h B_h x_j)
// Literal mode folds the identity into h:
//   f(x_i) + sum_{j<=i} gamma_j * (A_h B_h x_j + x_j)
inline Tensor pa_combine(const Tensor& f_out, const ResidualStream& stream, const PAParams& p,
                         std::size_t i) {
    if (stream.size() < i + 1)
        throw std::invalid_argument("pa_combine: stream holds " + std::to_string(stream.size()) +
                                    " entries, block index " + std::to_string(i) +
                                    " needs " + std::to_string(i + 1));
    if (p.gamma.size() < i + 1)
        throw std::invalid_argument("pa_combine: gamma has " + std::to_string(p.gamma.size()) +
                                    " entries, need " + std::to_string(i + 1));
    detail::check_same_shape("pa_combine", f_out, stream[i]);
    Tensor out = p.literal_mode ? f_out : add(f_out, stream[i]);
    for (std::size_t j = 0; j <= i; ++j) {
        Tensor h = lowrank_apply(stream[j], p.A_h, p.B_h);
        if (p.literal_mode) h = add(h, stream[j]);
        out = add(out, mul_scalar(h, p.gamma[j]));
    }
    return out;
}

struct ResidualParamsView {
    const RWParams* rw = nullptr;
    const LRParams* lr = nullptr;
    const PAParams* pa = nullptr;
};

// General combination, Eq. x_{i+1} = alpha f(x_i) + g(x_i, ..., x_0).
// Composition order for combined variants: RW scalars weight f_out and the
// plain x_i term, then the LR term, then the PA history sum.
inline Tensor apply_residual(const ResidualVariant& v, const Tensor& f_out,
                             const ResidualStream& stream, const ResidualParamsView& p,
                             std::size_t i) {
    if (stream.size() < i + 1)
        throw std::invalid_argument("apply_residual: stream too short for block " +
                                    std::to_string(i));
    const Tensor& x_i = stream[i];
    const bool rw = has_rw(v.kind), lr = has_lr(v.kind), pa = has_pa(v.kind);
    if (rw && !p.rw) throw std::invalid_argument("apply_residual: missing RW params");
    if (lr && !p.lr) throw std::invalid_argument("apply_residual: missing LR params");
    if (pa && !p.pa) throw std::invalid_argument("apply_residual: missing PA params");

    Tensor out = [&] {
        if (rw) return rw_combine(f_out, x_i, *p.rw);
        if (pa && p.pa->literal_mode) return f_out;  // literal PA owns the identity path
        return add(f_out, x_i);
    }();
    if (lr) out = add(out, lowrank_apply(x_i, p.lr->A, p.lr->B));
    if (pa) {
        for (std::size_t j = 0; j <= i; ++j) {
            Tensor h = lowrank_apply(stream[j], p.pa->A_h, p.pa->B_h);
            if (p.pa->literal_mode) h = add(h, stream[j]);
            out = add(out, mul_scalar(h, p.pa->gamma[j]));
        }
    }
    return out;
}

// Added-parameter count relative to the vanilla model:
//   RW: 2 per block; LR: 2rD per block; PA: shared factors 2rD plus N gammas.
inline std::size_t param_count(const ResidualVariant& v, std::size_t D, std::size_t N,
                               std::size_t r) {
    if (D < 1 || N < 1) throw std::invalid_argument("param_count: D and N must be >= 1");
    if (needs_rank(v.kind) && (r < 1 || r > D))
        throw std::invalid_argument("param_count: rank " + std::to_string(r) +
                                    " out of range [1," + std::to_string(D) + "]");
    std::size_t total = 0;
    if (has_rw(v.kind)) total += 2 * N;
    if (has_lr(v.kind)) total += 2 * r * D * N;
    if (has_pa(v.kind)) total += 2 * r * D + N;
    return total;
}

// Plain-value initialization for one variant's parameters; consumed by the
// model builder and usable standalone in tests.
struct VariantInit {
    std::vector<std::array<double, 2>> rw_logits;  // per block (alpha, beta)
    std::vector<std::vector<double>> lr_A;         // per block, D*r
    std::vector<std::vector<double>> lr_B;         // per block, r*D
    std::vector<double> pa_A_h;                    // D*r
    std::vector<double> pa_B_h;                    // r*D
    std::vector<double> pa_gamma;                  // N
};

// RW logits start at the identity-like point of their mode, the low-rank
// B factors start at zero so every default-mode variant reduces to the
// vanilla forward pass at initialization. Literal-mode PA cannot reduce to
// vanilla with gamma = 0 folded over the identity; it starts at gamma = 0
// anyway and warns once.
inline VariantInit init_params(const ResidualVariant& v, std::size_t D, std::size_t N,
                               RWNorm norm, bool pa_literal, std::uint64_t seed) {
    if (D < 1 || N < 1) throw std::invalid_argument("init_params: D and N must be >= 1");
    const std::size_t r = v.rank;
    if (needs_rank(v.kind) && (r < 1 || r > D))
        throw std::invalid_argument("init_params: rank " + std::to_string(r) +
                                    " out of range [1," + std::to_string(D) + "]");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(1.0 / static_cast<double>(D)));
    VariantInit out;
    if (has_rw(v.kind)) {
        const double logit = norm == RWNorm::None ? 1.0 : 0.0;
        out.rw_logits.assign(N, {logit, logit});
    }
    if (has_lr(v.kind)) {
        for (std::size_t b = 0; b < N; ++b) {
            std::vector<double> A(D * r);
            for (double& x : A) x = gauss(rng);
            out.lr_A.push_back(std::move(A));
            out.lr_B.push_back(std::vector<double>(r * D, 0.0));
        }
    }
    if (has_pa(v.kind)) {
        out.pa_A_h.resize(D * r);
        for (double& x : out.pa_A_h) x = gauss(rng);
        out.pa_B_h.assign(r * D, 0.0);
        out.pa_gamma.assign(N, 0.0);
        if (pa_literal)
            std::cerr << "warning: literal-mode PA with gamma = 0 does not reduce to the "
                         "vanilla residual at initialization\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Operation-count probe for the low-rank path
// ---------------------------------------------------------------------------

// Counts multiply-adds for the LR augmentation term on one vector, along
// both routes. The low-rank route computes A (B x) + x directly; the dense
// route materializes W = A B + I and multiplies. Counters cover only the
// per-vector application, not the one-time W construction.
struct LowRankProbe {
    std::vector<double> lowrank_out, dense_out;
    std::size_t lowrank_madds = 0, dense_madds = 0;
};

inline LowRankProbe lowrank_cost_probe(const std::vector<double>& A, const std::vector<double>& B,
                                       const std::vector<double>& x, std::size_t D,
                                       std::size_t r) {
    LowRankProbe p;
    // low-rank route: t = B x (rD madds), y = A t (rD madds), y += x (D adds)
    std::vector<double> t(r, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < D; ++j) {
            t[i] += B[i * D + j] * x[j];
            ++p.lowrank_madds;
        }
    p.lowrank_out.assign(D, 0.0);
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = 0; j < r; ++j) {
            p.lowrank_out[i] += A[i * r + j] * t[j];
            ++p.lowrank_madds;
        }
    for (std::size_t i = 0; i < D; ++i) {
        p.lowrank_out[i] += x[i];
        ++p.lowrank_madds;
    }
    // dense route: W = A B + I, then y = W x (D*D madds)
    std::vector<double> W(D * D, 0.0);
    for (std::size_t i = 0; i < D; ++i) {
        for (std::size_t k = 0; k < r; ++k)
            for (std::size_t j = 0; j < D; ++j) W[i * D + j] += A[i * r + k] * B[k * D + j];
        W[i * D + i] += 1.0;
    }
    p.dense_out.assign(D, 0.0);
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = 0; j < D; ++j) {
            p.dense_out[i] += W[i * D + j] * x[j];
            ++p.dense_madds;
        }
    return p;
}

}  // namespace laurel
