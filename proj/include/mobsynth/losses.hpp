#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mobsynth/activity.hpp"

namespace mobsynth {

/// Batch of per-slot activity probabilities (or logits), B x 96 x 15,
/// row-major. Rows sum to one after softmax stages.
struct ProbTensor {
    int batch = 0;
    std::vector<float> values; // batch * 96 * 15

    ProbTensor() = default;
    explicit ProbTensor(int b) : batch(b), values(static_cast<size_t>(b) * SlotGrid::kSlots * kNumActivityCodes, 0.0f) {}

    float *row(int b, int slot) {
        return values.data() + (static_cast<size_t>(b) * SlotGrid::kSlots + static_cast<size_t>(slot)) * kNumActivityCodes;
    }
    const float *row(int b, int slot) const {
        return values.data() + (static_cast<size_t>(b) * SlotGrid::kSlots + static_cast<size_t>(slot)) * kNumActivityCodes;
    }
};

inline constexpr double kLogClamp = 1e-12;

/// Per-sample scoring information: target codes and which slots and
/// boundaries take part in the loss. Slots with empty targets never score.
struct ScoredTargets {
    const uint8_t *codes = nullptr; // 96 values, kEmpty or 1..15
    const uint8_t *real_mask = nullptr; // optional: 1 real, 0 synthetic, per slot

    bool scored(int slot) const { return SlotGrid::is_code(codes[slot]); }
    bool is_real(int slot) const { return real_mask == nullptr || real_mask[slot] != 0; }
};

struct LossWeights {
    double w1 = 0.7;  // cross-entropy composite
    double w2 = 0.15; // transition
    double w3 = 0.15; // DTW
    double w_real = 2.0;
    double w_synth = 1.0;
    std::array<double, kNumActivityCodes> class_weights = [] {
        std::array<double, kNumActivityCodes> w{};
        w.fill(1.0);
        return w;
    }();

    void validate() const {
        require(w1 >= 0 && w2 >= 0 && w3 >= 0 && w1 + w2 + w3 > 0, "loss weights must be non-negative, not all zero");
        for (double w : class_weights) {
            require(w > 0, "class weights must be positive");
        }
    }
};

/// Weighted cross-entropy over scored slots: mean of -w_c log p_c at the
/// target class, log input clamped at 1e-12.
template <typename Scalar>
Scalar ce_loss(std::span<const Scalar> probs, // n_samples * 96 * 15
               std::span<const ScoredTargets> targets,
               const std::array<double, kNumActivityCodes> &class_weights) {
    double total = 0;
    long count = 0;
    for (size_t s = 0; s < targets.size(); ++s) {
        const Scalar *p = probs.data() + s * SlotGrid::kSlots * kNumActivityCodes;
        for (int k = 0; k < SlotGrid::kSlots; ++k) {
            if (!targets[s].scored(k)) {
                continue;
            }
            int c = targets[s].codes[k] - 1;
            double pc = std::max(static_cast<double>(p[k * kNumActivityCodes + c]), kLogClamp);
            total += -class_weights[static_cast<size_t>(c)] * std::log(pc);
            ++count;
        }
    }
    require(count > 0, "ce_loss: no scored slots");
    return static_cast<Scalar>(total / static_cast<double>(count));
}

/// Transition loss: binary cross-entropy between true code changes and the
/// soft predicted change probability t_hat = 1 - <p_i, p_{i+1}>, averaged
/// over boundaries whose two slots are both scored.
template <typename Scalar>
Scalar transition_loss(std::span<const Scalar> probs, std::span<const ScoredTargets> targets) {
    double total = 0;
    long count = 0;
    for (size_t s = 0; s < targets.size(); ++s) {
        const Scalar *p = probs.data() + s * SlotGrid::kSlots * kNumActivityCodes;
        for (int k = 0; k + 1 < SlotGrid::kSlots; ++k) {
            if (!targets[s].scored(k) || !targets[s].scored(k + 1)) {
                continue;
            }
            double overlap = 0;
            const Scalar *a = p + k * kNumActivityCodes;
            const Scalar *b = a + kNumActivityCodes;
            for (int c = 0; c < kNumActivityCodes; ++c) {
                overlap += static_cast<double>(a[c]) * static_cast<double>(b[c]);
            }
            double t_hat = std::clamp(1.0 - overlap, kLogClamp, 1.0 - kLogClamp);
            double t = (targets[s].codes[k] != targets[s].codes[k + 1]) ? 1.0 : 0.0;
            total += -(t * std::log(t_hat) + (1.0 - t) * std::log(1.0 - t_hat));
            ++count;
        }
    }
    require(count > 0, "transition_loss: no scored boundaries");
    return static_cast<Scalar>(total / static_cast<double>(count));
}

/// Classic dynamic-time-warping distance between two code sequences with
/// unit substitution cost (0 if equal, 1 otherwise); the optimal warping
/// path may step right, down, or diagonally.
inline double dtw_distance(std::span<const uint8_t> a, std::span<const uint8_t> b) {
    require(!a.empty() && !b.empty(), "dtw_distance: empty sequence");
    const size_t n = a.size();
    const size_t m = b.size();
    constexpr double kInf = 1e18;
    std::vector<double> prev(m + 1, kInf);
    std::vector<double> cur(m + 1, kInf);
    prev[0] = 0.0;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = kInf;
        for (size_t j = 1; j <= m; ++j) {
            double cost = (a[i - 1] == b[j - 1]) ? 0.0 : 1.0;
            cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

/// DTW term for one sample: distance between the argmax code path and the
/// target codes over scored slots.
inline double dtw_loss_sample(const float *probs, const ScoredTargets &target) {
    std::vector<uint8_t> pred;
    std::vector<uint8_t> truth;
    pred.reserve(SlotGrid::kSlots);
    truth.reserve(SlotGrid::kSlots);
    for (int k = 0; k < SlotGrid::kSlots; ++k) {
        if (!target.scored(k)) {
            continue;
        }
        const float *p = probs + k * kNumActivityCodes;
        int best = 0;
        for (int c = 1; c < kNumActivityCodes; ++c) {
            if (p[c] > p[best]) {
                best = c;
            }
        }
        pred.push_back(static_cast<uint8_t>(best + 1));
        truth.push_back(target.codes[k]);
    }
    if (truth.empty()) {
        return 0.0;
    }
    return dtw_distance(pred, truth);
}

struct LossBreakdown {
    double ce_real = 0;
    double ce_synth = 0;
    double ce = 0; // unsplit mean CE over all scored slots
    double transition = 0;
    double dtw = 0;
    double total = 0;
    long real_slots = 0;
    long synth_slots = 0;
};

/// Composite loss: w1 (w_real L_real + w_synth L_synth) + w2 L_TR + w3 L_DTW,
/// where L_real / L_synth are mean cross-entropies over real / synthetic
/// scored slots. An absent side contributes zero.
inline LossBreakdown total_loss(const ProbTensor &pred, std::span<const ScoredTargets> targets,
                                const LossWeights &w) {
    w.validate();
    require(static_cast<size_t>(pred.batch) == targets.size(), "total_loss: batch size mismatch");
    LossBreakdown out;
    double sum_real = 0, sum_synth = 0;
    double sum_tr = 0;
    long n_tr = 0;
    for (size_t s = 0; s < targets.size(); ++s) {
        const float *p = pred.row(static_cast<int>(s), 0);
        for (int k = 0; k < SlotGrid::kSlots; ++k) {
            if (!targets[s].scored(k)) {
                continue;
            }
            int c = targets[s].codes[k] - 1;
            double pc = std::max(static_cast<double>(p[k * kNumActivityCodes + c]), kLogClamp);
            double l = -w.class_weights[static_cast<size_t>(c)] * std::log(pc);
            if (targets[s].is_real(k)) {
                sum_real += l;
                ++out.real_slots;
            } else {
                sum_synth += l;
                ++out.synth_slots;
            }
        }
        for (int k = 0; k + 1 < SlotGrid::kSlots; ++k) {
            if (!targets[s].scored(k) || !targets[s].scored(k + 1)) {
                continue;
            }
            double overlap = 0;
            const float *a = p + k * kNumActivityCodes;
            const float *b = a + kNumActivityCodes;
            for (int c = 0; c < kNumActivityCodes; ++c) {
                overlap += static_cast<double>(a[c]) * static_cast<double>(b[c]);
            }
            double t_hat = std::clamp(1.0 - overlap, kLogClamp, 1.0 - kLogClamp);
            double t = (targets[s].codes[k] != targets[s].codes[k + 1]) ? 1.0 : 0.0;
            sum_tr += -(t * std::log(t_hat) + (1.0 - t) * std::log(1.0 - t_hat));
            ++n_tr;
        }
        out.dtw += dtw_loss_sample(p, targets[s]);
    }
    out.ce_real = out.real_slots > 0 ? sum_real / static_cast<double>(out.real_slots) : 0.0;
    out.ce_synth = out.synth_slots > 0 ? sum_synth / static_cast<double>(out.synth_slots) : 0.0;
    long total_slots = out.real_slots + out.synth_slots;
    require(total_slots > 0, "total_loss: no scored slots");
    out.ce = (sum_real + sum_synth) / static_cast<double>(total_slots);
    out.transition = n_tr > 0 ? sum_tr / static_cast<double>(n_tr) : 0.0;
    out.dtw /= static_cast<double>(targets.size());
    out.total = w.w1 * (w.w_real * out.ce_real + w.w_synth * out.ce_synth) + w.w2 * out.transition +
                w.w3 * out.dtw;
    return out;
}

/// Raw loss sums accumulated by ce_tr_grad; the caller divides by its own
/// slot/boundary counts to get means.
struct CeTrSums {
    double ce_real = 0;
    double ce_synth = 0;
    double transition = 0;
};

/// Softmax over logits followed by the cross-entropy and transition terms,
/// with the analytic gradient w.r.t. the logits. Shared by training and the
/// finite-difference gradient check; the DTW term runs on decoded argmax
/// paths and carries no gradient. The three scale factors fold the loss
/// weighting and the batch-level normalization (e.g. w1*w_real/N_real) into
/// the gradient, while the returned sums stay unscaled.
/// `logits` and `grad_out` are n_samples * 96 * 15.
template <typename Scalar>
CeTrSums ce_tr_grad(std::span<const Scalar> logits, std::span<const ScoredTargets> targets,
                    const std::array<double, kNumActivityCodes> &class_weights, double scale_real,
                    double scale_synth, double scale_tr, std::span<Scalar> grad_out) {
    const int K = SlotGrid::kSlots;
    const int C = kNumActivityCodes;
    CeTrSums sums;
    std::vector<double> probs(static_cast<size_t>(K) * C);
    std::vector<double> dprob(static_cast<size_t>(K) * C);

    for (size_t s = 0; s < targets.size(); ++s) {
        const Scalar *z = logits.data() + s * static_cast<size_t>(K) * C;
        Scalar *g = grad_out.data() + s * static_cast<size_t>(K) * C;
        std::fill(dprob.begin(), dprob.end(), 0.0);

        for (int k = 0; k < K; ++k) {
            const Scalar *zk = z + k * C;
            double mx = static_cast<double>(zk[0]);
            for (int c = 1; c < C; ++c) {
                mx = std::max(mx, static_cast<double>(zk[c]));
            }
            double denom = 0;
            for (int c = 0; c < C; ++c) {
                double e = std::exp(static_cast<double>(zk[c]) - mx);
                probs[static_cast<size_t>(k * C + c)] = e;
                denom += e;
            }
            for (int c = 0; c < C; ++c) {
                probs[static_cast<size_t>(k * C + c)] /= denom;
            }
        }

        // cross-entropy
        for (int k = 0; k < K; ++k) {
            if (!targets[s].scored(k)) {
                continue;
            }
            int c = targets[s].codes[k] - 1;
            bool real = targets[s].is_real(k);
            double scale = real ? scale_real : scale_synth;
            double pc = probs[static_cast<size_t>(k * C + c)];
            double pc_cl = std::max(pc, kLogClamp);
            double l = -class_weights[static_cast<size_t>(c)] * std::log(pc_cl);
            (real ? sums.ce_real : sums.ce_synth) += l;
            if (pc >= kLogClamp) {
                dprob[static_cast<size_t>(k * C + c)] += scale * (-class_weights[static_cast<size_t>(c)] / pc_cl);
            }
        }

        // transition
        for (int k = 0; k + 1 < K; ++k) {
            if (!targets[s].scored(k) || !targets[s].scored(k + 1)) {
                continue;
            }
            double overlap = 0;
            for (int c = 0; c < C; ++c) {
                overlap += probs[static_cast<size_t>(k * C + c)] * probs[static_cast<size_t>((k + 1) * C + c)];
            }
            double t_hat_raw = 1.0 - overlap;
            double t_hat = std::clamp(t_hat_raw, kLogClamp, 1.0 - kLogClamp);
            double t = (targets[s].codes[k] != targets[s].codes[k + 1]) ? 1.0 : 0.0;
            sums.transition += -(t * std::log(t_hat) + (1.0 - t) * std::log(1.0 - t_hat));
            if (t_hat_raw > kLogClamp && t_hat_raw < 1.0 - kLogClamp) {
                double dl_dthat = scale_tr * (-(t / t_hat) + (1.0 - t) / (1.0 - t_hat));
                for (int c = 0; c < C; ++c) {
                    dprob[static_cast<size_t>(k * C + c)] += dl_dthat * -probs[static_cast<size_t>((k + 1) * C + c)];
                    dprob[static_cast<size_t>((k + 1) * C + c)] += dl_dthat * -probs[static_cast<size_t>(k * C + c)];
                }
            }
        }

        // back through softmax: dz = p .* (dp - <p, dp>)
        for (int k = 0; k < K; ++k) {
            double dot = 0;
            for (int c = 0; c < C; ++c) {
                dot += probs[static_cast<size_t>(k * C + c)] * dprob[static_cast<size_t>(k * C + c)];
            }
            for (int c = 0; c < C; ++c) {
                double p = probs[static_cast<size_t>(k * C + c)];
                g[k * C + c] = static_cast<Scalar>(p * (dprob[static_cast<size_t>(k * C + c)] - dot));
            }
        }
    }
    return sums;
}

} // namespace mobsynth
