#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mobsynth/demographics.hpp"
#include "mobsynth/losses.hpp"
#include "mobsynth/masking.hpp"
#include "mobsynth/metrics.hpp"
#include "mobsynth/network.hpp"

namespace mobsynth {

/// Three-phase masking curriculum: a warm-up on unmasked chains, an
/// intermediate phase at 40% masking, and a final phase at 70% masking,
/// with the three masking operators mixed uniformly per sample.
struct TrainSchedule {
    int total_epochs = 120;
    double warmup_frac = 0.10;
    double intermediate_frac = 0.30;
    double intermediate_masking = 0.40;
    double final_masking = 0.70;
    int batch_size = 512;
    double learning_rate = 0.001;
    double weight_decay = 1e-5;
    int early_stop_patience = 0; // 0 disables; counted within the final phase
    double val_fraction = 0.1;
    // period-masking segment parameters
    int segment_min_slots = 8;
    int segment_max_slots = 20;
    int max_segments = 8;

    void validate() const {
        require(total_epochs >= 1, "total_epochs must be positive");
        require(warmup_frac >= 0 && intermediate_frac >= 0 && warmup_frac + intermediate_frac <= 1.0,
                "phase fractions must be non-negative and sum to at most 1");
        require(batch_size >= 1 && learning_rate > 0, "batch size and learning rate must be positive");
        require(val_fraction >= 0 && val_fraction < 1, "val_fraction must be in [0,1)");
    }

    int warmup_epochs() const { return static_cast<int>(std::lround(warmup_frac * total_epochs)); }
    int intermediate_epochs() const {
        return static_cast<int>(std::lround(intermediate_frac * total_epochs));
    }

    int phase_of(int epoch) const {
        if (epoch < warmup_epochs()) {
            return 0;
        }
        if (epoch < warmup_epochs() + intermediate_epochs()) {
            return 1;
        }
        return 2;
    }

    double masking_of_phase(int phase) const {
        return phase == 0 ? 0.0 : (phase == 1 ? intermediate_masking : final_masking);
    }
};

struct TrainSample {
    SlotGrid target; // ground-truth codes; kEmpty slots never score
    std::array<uint8_t, SlotGrid::kSlots> real_mask{}; // 1 real, 0 synthetic
    std::optional<DemographicGroup> group;             // carried through, unused by the base model

    TrainSample() { real_mask.fill(1); }
    explicit TrainSample(SlotGrid t) : target(std::move(t)) { real_mask.fill(1); }
};

struct EpochStats {
    int epoch = 0;
    int phase = 0;
    double loss_ce = 0;
    double loss_tr = 0;
    double loss_dtw = 0;
    double total = 0;
    double val_jsd_type = 0;
    double val_jsd_start = 0;
    double val_jsd_end = 0;
};

inline void write_metrics_csv(const std::string &path, const std::vector<EpochStats> &log) {
    std::ofstream out(path);
    require(out.good(), "cannot open metrics file: " + path);
    out << "epoch,phase,loss_ce,loss_tr,loss_dtw,total,val_jsd_type,val_jsd_start,val_jsd_end\n";
    char buf[256];
    for (const EpochStats &e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", e.epoch, e.phase,
                      e.loss_ce, e.loss_tr, e.loss_dtw, e.total, e.val_jsd_type, e.val_jsd_start,
                      e.val_jsd_end);
        out << buf;
    }
}

/// Applies one of the three masking operators, chosen uniformly, at the
/// given masking level.
inline SlotGrid apply_random_masking(const SlotGrid &grid, double level, const TrainSchedule &sched,
                                     uint64_t seed) {
    if (level <= 0.0) {
        return grid;
    }
    Rng pick(seed);
    switch (pick.bounded(3)) {
    case 0:
        return mask_activity_based(grid, level, seed ^ 0x9e3779b9ULL);
    case 1:
        return mask_period(grid, sched.segment_min_slots, sched.segment_max_slots,
                           sched.max_segments, level, seed ^ 0x85ebca6bULL);
    default:
        return mask_slot_based(grid, level, seed ^ 0xc2b2ae35ULL);
    }
}

/// Completes a masked grid: observed slots (including empty ones) are
/// preserved verbatim, masked slots take the argmax of the model posterior.
/// Returns the per-slot probability rows alongside the completed grid.
template <typename Scalar>
std::pair<ProbTensor, SlotGrid> reconstruct(const Model<Scalar> &model, const SlotGrid &masked) {
    require(masked.observed_count() >= 1, "reconstruct: grid is fully masked");
    typename Model<Scalar>::Cache cache;
    model.forward(masked, cache, false, nullptr);

    ProbTensor probs(1);
    SlotGrid completed = masked;
    for (int k = 0; k < SlotGrid::kSlots; ++k) {
        double mx = cache.logits(k, 0);
        for (int c = 1; c < kNumActivityCodes; ++c) {
            mx = std::max(mx, static_cast<double>(cache.logits(k, c)));
        }
        double denom = 0;
        for (int c = 0; c < kNumActivityCodes; ++c) {
            denom += std::exp(static_cast<double>(cache.logits(k, c)) - mx);
        }
        int best = 0;
        for (int c = 0; c < kNumActivityCodes; ++c) {
            double p = std::exp(static_cast<double>(cache.logits(k, c)) - mx) / denom;
            probs.row(0, k)[c] = static_cast<float>(p);
            if (cache.logits(k, c) > cache.logits(k, best)) {
                best = c;
            }
        }
        if (masked.slots[static_cast<size_t>(k)] == SlotGrid::kMasked) {
            completed.slots[static_cast<size_t>(k)] = static_cast<uint8_t>(best + 1);
        }
    }
    return {std::move(probs), std::move(completed)};
}

/// Masks held-out targets at the given level, reconstructs them, and
/// returns the JSD of the type/start/end marginals of the completed chains
/// against the ground truth.
template <typename Scalar>
std::array<double, 3> reconstruction_jsd(const Model<Scalar> &model,
                                         const std::vector<TrainSample> &val,
                                         const TrainSchedule &sched, double level, uint64_t seed) {
    std::vector<ActivityChain> truth;
    std::vector<ActivityChain> completed;
    truth.reserve(val.size());
    completed.reserve(val.size());
    for (size_t i = 0; i < val.size(); ++i) {
        SlotGrid masked = apply_random_masking(val[i].target, level, sched, derive_seed(seed, "valmask", i));
        if (masked.observed_count() == 0) {
            masked.slots[0] = val[i].target.slots[0];
        }
        auto [probs, done] = reconstruct(model, masked);
        truth.push_back(decode_grid(val[i].target));
        completed.push_back(decode_grid(done));
    }
    auto mt = marginals_from_chains(truth);
    auto mc = marginals_from_chains(completed);
    return {jsd(mt[MarginalKind::Type], mc[MarginalKind::Type]),
            jsd(mt[MarginalKind::StartTime], mc[MarginalKind::StartTime]),
            jsd(mt[MarginalKind::EndTime], mc[MarginalKind::EndTime])};
}

struct TrainOptions {
    bool progressive_unfreezing = false; // on for transfer fine-tuning
    bool compute_val_jsd = true;
};

/// Three-phase training loop. Deterministic for a fixed seed: sample order,
/// masking, and dropout all derive from it. Returns the per-epoch metrics
/// log; the model is trained in place.
template <typename Scalar>
std::vector<EpochStats> train(Model<Scalar> &model, const std::vector<TrainSample> &data,
                              const TrainSchedule &sched, const LossWeights &weights, uint64_t seed,
                              const TrainOptions &opts = {}) {
    sched.validate();
    weights.validate();
    require(!data.empty(), "train: empty dataset");

    // deterministic split: every ceil(1/val_fraction)-th sample validates
    std::vector<const TrainSample *> train_set;
    std::vector<TrainSample> val_set;
    if (sched.val_fraction > 0 && data.size() >= 10) {
        size_t stride = static_cast<size_t>(std::llround(1.0 / sched.val_fraction));
        for (size_t i = 0; i < data.size(); ++i) {
            if (i % stride == stride - 1) {
                val_set.push_back(data[i]);
            } else {
                train_set.push_back(&data[i]);
            }
        }
    } else {
        for (const TrainSample &s : data) {
            train_set.push_back(&s);
        }
    }
    require(!train_set.empty(), "train: no training samples after split");

    const int K = SlotGrid::kSlots;
    const int C = kNumActivityCodes;
    std::vector<EpochStats> log;
    typename Model<Scalar>::Cache cache;
    typename Model<Scalar>::Mat dlogits(K, C);

    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::vector<float> best_params;
    auto snapshot = [&]() {
        best_params.clear();
        for (const auto &p : model.params()) {
            for (Eigen::Index i = 0; i < p.value.size(); ++i) {
                best_params.push_back(static_cast<float>(p.value.data()[i]));
            }
        }
    };
    auto restore = [&]() {
        size_t off = 0;
        for (auto &p : model.params()) {
            for (Eigen::Index i = 0; i < p.value.size(); ++i) {
                p.value.data()[i] = static_cast<Scalar>(best_params[off++]);
            }
        }
    };

    for (int epoch = 0; epoch < sched.total_epochs; ++epoch) {
        int phase = sched.phase_of(epoch);
        double level = sched.masking_of_phase(phase);
        FreezeState freeze;
        if (opts.progressive_unfreezing) {
            freeze = progressive_unfreeze(epoch, sched.total_epochs);
        }

        Rng order_rng(derive_seed(seed, "order", static_cast<uint64_t>(epoch)));
        std::vector<size_t> order(train_set.size());
        for (size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        order_rng.shuffle(order);

        double ep_ce = 0, ep_tr = 0, ep_dtw = 0, ep_total = 0;
        long ep_batches = 0;

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(sched.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(sched.batch_size));

            // batch scoring counts over targets (masking does not change them)
            long n_real = 0, n_synth = 0, n_bound = 0;
            for (size_t bi = start; bi < end; ++bi) {
                const TrainSample &ts = *train_set[order[bi]];
                for (int k = 0; k < K; ++k) {
                    if (!SlotGrid::is_code(ts.target.slots[static_cast<size_t>(k)])) {
                        continue;
                    }
                    (ts.real_mask[static_cast<size_t>(k)] != 0 ? n_real : n_synth) += 1;
                    if (k + 1 < K && SlotGrid::is_code(ts.target.slots[static_cast<size_t>(k + 1)])) {
                        ++n_bound;
                    }
                }
            }
            if (n_real + n_synth == 0) {
                continue;
            }
            double scale_real = n_real > 0 ? weights.w1 * weights.w_real / static_cast<double>(n_real) : 0.0;
            double scale_synth =
                n_synth > 0 ? weights.w1 * weights.w_synth / static_cast<double>(n_synth) : 0.0;
            double scale_tr = n_bound > 0 ? weights.w2 / static_cast<double>(n_bound) : 0.0;

            model.zero_grad();
            CeTrSums sums;
            double dtw_sum = 0;
            for (size_t bi = start; bi < end; ++bi) {
                const TrainSample &ts = *train_set[order[bi]];
                uint64_t sample_tag = static_cast<uint64_t>(epoch) * 1000003ULL + order[bi];
                SlotGrid input = apply_random_masking(ts.target, level, sched,
                                                      derive_seed(seed, "mask", sample_tag));
                Rng dropout_rng(derive_seed(seed, "dropout", sample_tag));
                model.forward(input, cache, true, &dropout_rng);

                ScoredTargets st;
                st.codes = ts.target.slots.data();
                st.real_mask = ts.real_mask.data();
                std::span<const Scalar> logits(cache.logits.data(), static_cast<size_t>(K) * C);
                std::span<Scalar> grad(dlogits.data(), static_cast<size_t>(K) * C);
                CeTrSums s = ce_tr_grad<Scalar>(logits, std::span(&st, 1), weights.class_weights,
                                                scale_real, scale_synth, scale_tr, grad);
                sums.ce_real += s.ce_real;
                sums.ce_synth += s.ce_synth;
                sums.transition += s.transition;
                if (weights.w3 > 0) {
                    std::vector<uint8_t> pred, truth;
                    for (int k = 0; k < K; ++k) {
                        if (!st.scored(k)) {
                            continue;
                        }
                        int best = 0;
                        for (int c = 1; c < C; ++c) {
                            if (cache.logits(k, c) > cache.logits(k, best)) {
                                best = c;
                            }
                        }
                        pred.push_back(static_cast<uint8_t>(best + 1));
                        truth.push_back(ts.target.slots[static_cast<size_t>(k)]);
                    }
                    if (!truth.empty()) {
                        dtw_sum += dtw_distance(pred, truth);
                    }
                }
                model.backward(cache, dlogits);
            }

            double l_real = n_real > 0 ? sums.ce_real / static_cast<double>(n_real) : 0.0;
            double l_synth = n_synth > 0 ? sums.ce_synth / static_cast<double>(n_synth) : 0.0;
            double l_tr = n_bound > 0 ? sums.transition / static_cast<double>(n_bound) : 0.0;
            double l_dtw = dtw_sum / static_cast<double>(end - start);
            double total = weights.w1 * (weights.w_real * l_real + weights.w_synth * l_synth) +
                           weights.w2 * l_tr + weights.w3 * l_dtw;
            require(std::isfinite(total), "training diverged (non-finite loss) at epoch " +
                                              std::to_string(epoch));

            model.adam_step(sched.learning_rate, freeze, sched.weight_decay);

            double l_ce_mean = (sums.ce_real + sums.ce_synth) / static_cast<double>(n_real + n_synth);
            ep_ce += l_ce_mean;
            ep_tr += l_tr;
            ep_dtw += l_dtw;
            ep_total += total;
            ++ep_batches;
        }

        EpochStats st;
        st.epoch = epoch;
        st.phase = phase;
        st.loss_ce = ep_ce / std::max(1L, ep_batches);
        st.loss_tr = ep_tr / std::max(1L, ep_batches);
        st.loss_dtw = ep_dtw / std::max(1L, ep_batches);
        st.total = ep_total / std::max(1L, ep_batches);

        if (!val_set.empty() && opts.compute_val_jsd) {
            auto j = reconstruction_jsd(model, val_set, sched, sched.final_masking,
                                        derive_seed(seed, "val", static_cast<uint64_t>(epoch)));
            st.val_jsd_type = j[0];
            st.val_jsd_start = j[1];
            st.val_jsd_end = j[2];

            if (sched.early_stop_patience > 0 && phase == 2) {
                double score = (j[0] + j[1] + j[2]) / 3.0;
                if (score < best_val) {
                    best_val = score;
                    since_best = 0;
                    snapshot();
                } else if (++since_best >= sched.early_stop_patience) {
                    log.push_back(st);
                    restore();
                    break;
                }
            }
        }
        log.push_back(st);
    }
    if (sched.early_stop_patience > 0 && !best_params.empty() && since_best > 0) {
        restore();
    }
    return log;
}

} // namespace mobsynth
