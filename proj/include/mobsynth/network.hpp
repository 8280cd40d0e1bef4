#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mobsynth/activity.hpp"
#include "mobsynth/common.hpp"
#include "mobsynth/rng.hpp"

namespace mobsynth {

/// Freezable parameter groups, released in this order during progressive
/// unfreezing: output head + embeddings first, then the blocks nearest the
/// input, then the middle blocks.
enum class LayerGroup : uint8_t { Embedding = 0, InputNear = 1, Middle = 2, OutputHead = 3 };

inline const char *layer_group_name(LayerGroup g) {
    switch (g) {
    case LayerGroup::Embedding:
        return "embedding";
    case LayerGroup::InputNear:
        return "input_near";
    case LayerGroup::Middle:
        return "middle";
    case LayerGroup::OutputHead:
        return "output_head";
    }
    return "?";
}

struct FreezeState {
    std::array<bool, 4> trainable = {true, true, true, true};

    bool operator==(const FreezeState &) const = default;
    bool is_trainable(LayerGroup g) const { return trainable[static_cast<size_t>(g)]; }
};

/// Progressive unfreezing schedule: first quarter of epochs trains only the
/// output head and embeddings, second quarter adds the input-near blocks,
/// the rest trains everything.
inline FreezeState progressive_unfreeze(int epoch, int total_epochs) {
    require(total_epochs > 0 && epoch >= 0 && epoch < total_epochs,
            "progressive_unfreeze: epoch out of range");
    double frac = static_cast<double>(epoch) / static_cast<double>(total_epochs);
    FreezeState st;
    st.trainable = {true, false, false, true};
    if (frac >= 0.25) {
        st.trainable[static_cast<size_t>(LayerGroup::InputNear)] = true;
    }
    if (frac >= 0.5) {
        st.trainable[static_cast<size_t>(LayerGroup::Middle)] = true;
    }
    return st;
}

struct ModelConfig {
    int width = 64;
    int blocks = 4;
    double dropout = 0.1;

    void validate() const {
        require(width >= 4 && width <= 1024, "model width out of range");
        require(blocks >= 1 && blocks <= 32, "block count out of range");
        require(dropout >= 0.0 && dropout < 1.0, "dropout out of [0,1)");
    }
};

inline constexpr int kVocabSize = 17; // empty, 15 codes, mask token
inline constexpr int kNumDays = 7;

/// Slot-sequence classifier: token/slot/day embeddings feeding a stack of
/// gated token-mixing blocks (layer norm, channel expansion, a learned
/// 96x96 slot-mixing projection gating one half of the expansion, and a
/// channel projection back, with residual), then a norm + linear head over
/// the 15 activity codes. Roughly 100k parameters at the default size.
template <typename Scalar = float> class Model {
  public:
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    struct Param {
        std::string name;
        LayerGroup group = LayerGroup::Middle;
        Mat value;
        Mat grad;
        Mat m; // Adam first moment
        Mat v; // Adam second moment

        void init_moments() {
            grad = Mat::Zero(value.rows(), value.cols());
            m = Mat::Zero(value.rows(), value.cols());
            v = Mat::Zero(value.rows(), value.cols());
        }
    };

    struct Block {
        size_t ln_gamma, ln_beta;
        size_t w_in, b_in;
        size_t t_mix, b_mix;
        size_t w_out, b_out;
    };

    Model() = default;

    Model(const ModelConfig &cfg, uint64_t init_seed) : cfg_(cfg) {
        cfg.validate();
        Rng rng(derive_seed(init_seed, "model-init"));
        const int d = cfg.width;
        const int K = SlotGrid::kSlots;

        emb_code_ = add_param("emb_code", LayerGroup::Embedding, kVocabSize, d);
        emb_slot_ = add_param("emb_slot", LayerGroup::Embedding, K, d);
        emb_dow_ = add_param("emb_dow", LayerGroup::Embedding, kNumDays, d);

        blocks_.resize(static_cast<size_t>(cfg.blocks));
        for (int b = 0; b < cfg.blocks; ++b) {
            LayerGroup g = (b < cfg.blocks / 2) ? LayerGroup::InputNear : LayerGroup::Middle;
            std::string p = "block" + std::to_string(b) + ".";
            Block &blk = blocks_[static_cast<size_t>(b)];
            blk.ln_gamma = add_param(p + "ln_gamma", g, 1, d);
            blk.ln_beta = add_param(p + "ln_beta", g, 1, d);
            blk.w_in = add_param(p + "w_in", g, d, 2 * d);
            blk.b_in = add_param(p + "b_in", g, 1, 2 * d);
            blk.t_mix = add_param(p + "t_mix", g, K, K);
            blk.b_mix = add_param(p + "b_mix", g, K, 1);
            blk.w_out = add_param(p + "w_out", g, d, d);
            blk.b_out = add_param(p + "b_out", g, 1, d);
        }
        head_ln_gamma_ = add_param("head.ln_gamma", LayerGroup::OutputHead, 1, d);
        head_ln_beta_ = add_param("head.ln_beta", LayerGroup::OutputHead, 1, d);
        head_w_ = add_param("head.w", LayerGroup::OutputHead, d, kNumActivityCodes);
        head_b_ = add_param("head.b", LayerGroup::OutputHead, 1, kNumActivityCodes);

        // init
        auto gauss = [&](size_t idx, double sd) {
            Mat &mt = params_[idx].value;
            for (Eigen::Index i = 0; i < mt.rows(); ++i) {
                for (Eigen::Index j = 0; j < mt.cols(); ++j) {
                    mt(i, j) = static_cast<Scalar>(rng.normal(0.0, sd));
                }
            }
        };
        gauss(emb_code_, 0.05);
        gauss(emb_slot_, 0.05);
        gauss(emb_dow_, 0.05);
        for (const Block &blk : blocks_) {
            params_[blk.ln_gamma].value.setOnes();
            params_[blk.ln_beta].value.setZero();
            gauss(blk.w_in, std::sqrt(2.0 / d));
            params_[blk.b_in].value.setZero();
            gauss(blk.t_mix, 1e-3); // near-identity gate at init
            params_[blk.b_mix].value.setOnes();
            gauss(blk.w_out, std::sqrt(2.0 / d));
            params_[blk.b_out].value.setZero();
        }
        params_[head_ln_gamma_].value.setOnes();
        params_[head_ln_beta_].value.setZero();
        gauss(head_w_, 0.05); // near-uniform initial posterior
        params_[head_b_].value.setZero();
        for (Param &prm : params_) {
            prm.init_moments();
        }
    }

    const ModelConfig &config() const { return cfg_; }
    std::vector<Param> &params() { return params_; }
    const std::vector<Param> &params() const { return params_; }

    size_t parameter_count() const {
        size_t n = 0;
        for (const Param &p : params_) {
            n += static_cast<size_t>(p.value.size());
        }
        return n;
    }

    /// Per-sample activations retained for the backward pass. Reused across
    /// samples within a batch.
    struct Cache {
        std::array<uint8_t, SlotGrid::kSlots> tokens{};
        int dow = 0;
        Mat x0;
        struct BlockCache {
            Mat x_in, xhat, u, u_act, s, w, drop_mask;
            Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std;
        };
        std::vector<BlockCache> blocks;
        Mat xhat_head;
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std_head;
        Mat logits;
    };

    /// Token for a slot value: 0 empty, 1..15 codes, 16 masked.
    static uint8_t slot_token(uint8_t slot_value) { return slot_value; }

    void forward(const SlotGrid &grid, Cache &cache, bool training = false, Rng *dropout_rng = nullptr) const {
        const int d = cfg_.width;
        const int K = SlotGrid::kSlots;
        cache.dow = grid.day_of_week;
        cache.blocks.resize(blocks_.size());

        cache.x0.resize(K, d);
        const Mat &ec = params_[emb_code_].value;
        const Mat &es = params_[emb_slot_].value;
        const Mat &ed = params_[emb_dow_].value;
        for (int k = 0; k < K; ++k) {
            uint8_t tok = slot_token(grid.slots[static_cast<size_t>(k)]);
            cache.tokens[static_cast<size_t>(k)] = tok;
            cache.x0.row(k) = ec.row(tok) + es.row(k) + ed.row(grid.day_of_week);
        }

        Mat x = cache.x0;
        for (size_t bi = 0; bi < blocks_.size(); ++bi) {
            const Block &blk = blocks_[bi];
            auto &bc = cache.blocks[bi];
            bc.x_in = x;

            layer_norm(x, params_[blk.ln_gamma].value, params_[blk.ln_beta].value, bc.xhat, bc.inv_std);
            Mat h = bc.xhat.array().rowwise() * params_[blk.ln_gamma].value.row(0).array();
            h.array().rowwise() += params_[blk.ln_beta].value.row(0).array();

            bc.u.noalias() = h * params_[blk.w_in].value;
            bc.u.array().rowwise() += params_[blk.b_in].value.row(0).array();
            bc.u_act = gelu(bc.u);

            auto u1 = bc.u_act.leftCols(d);
            auto u2 = bc.u_act.rightCols(d);
            bc.s.noalias() = params_[blk.t_mix].value * u2;
            bc.s.array().colwise() += params_[blk.b_mix].value.col(0).array();
            bc.w = u1.array() * bc.s.array();

            Mat v;
            v.noalias() = bc.w * params_[blk.w_out].value;
            v.array().rowwise() += params_[blk.b_out].value.row(0).array();

            if (training && cfg_.dropout > 0.0) {
                require(dropout_rng != nullptr, "training forward needs a dropout rng");
                bc.drop_mask.resize(K, d);
                Scalar keep = static_cast<Scalar>(1.0 - cfg_.dropout);
                for (int i = 0; i < K; ++i) {
                    for (int j = 0; j < d; ++j) {
                        bc.drop_mask(i, j) =
                            (dropout_rng->uniform01() < cfg_.dropout) ? Scalar(0) : Scalar(1) / keep;
                    }
                }
                v.array() *= bc.drop_mask.array();
            } else {
                bc.drop_mask.resize(0, 0);
            }
            x += v;
        }

        layer_norm(x, params_[head_ln_gamma_].value, params_[head_ln_beta_].value, cache.xhat_head,
                   cache.inv_std_head);
        Mat h = cache.xhat_head.array().rowwise() * params_[head_ln_gamma_].value.row(0).array();
        h.array().rowwise() += params_[head_ln_beta_].value.row(0).array();
        cache.logits.noalias() = h * params_[head_w_].value;
        cache.logits.array().rowwise() += params_[head_b_].value.row(0).array();
    }

    /// Accumulates parameter gradients for one sample given dL/dlogits.
    void backward(const Cache &cache, const Mat &dlogits) {
        const int d = cfg_.width;

        // head
        Mat h = cache.xhat_head.array().rowwise() * params_[head_ln_gamma_].value.row(0).array();
        h.array().rowwise() += params_[head_ln_beta_].value.row(0).array();
        params_[head_w_].grad.noalias() += h.transpose() * dlogits;
        params_[head_b_].grad.row(0) += dlogits.colwise().sum();
        Mat dh;
        dh.noalias() = dlogits * params_[head_w_].value.transpose();
        params_[head_ln_gamma_].grad.row(0) += (dh.array() * cache.xhat_head.array()).colwise().sum().matrix();
        params_[head_ln_beta_].grad.row(0) += dh.colwise().sum();
        Mat dx = layer_norm_backward(dh, cache.xhat_head, cache.inv_std_head,
                                     params_[head_ln_gamma_].value);

        for (size_t bi = blocks_.size(); bi-- > 0;) {
            const Block &blk = blocks_[bi];
            const auto &bc = cache.blocks[bi];
            Mat dv = dx; // residual passthrough keeps dx flowing

            if (bc.drop_mask.size() > 0) {
                dv.array() *= bc.drop_mask.array();
            }

            params_[blk.w_out].grad.noalias() += bc.w.transpose() * dv;
            params_[blk.b_out].grad.row(0) += dv.colwise().sum();
            Mat dw;
            dw.noalias() = dv * params_[blk.w_out].value.transpose();

            auto u1 = bc.u_act.leftCols(d);
            auto u2 = bc.u_act.rightCols(d);
            Mat du1 = dw.array() * bc.s.array();
            Mat ds = dw.array() * u1.array();
            params_[blk.t_mix].grad.noalias() += ds * u2.transpose();
            params_[blk.b_mix].grad.col(0) += ds.rowwise().sum();
            Mat du2;
            du2.noalias() = params_[blk.t_mix].value.transpose() * ds;

            Mat du_act(SlotGrid::kSlots, 2 * d);
            du_act.leftCols(d) = du1;
            du_act.rightCols(d) = du2;
            Mat du = du_act.array() * gelu_grad(bc.u).array();

            Mat hb = bc.xhat.array().rowwise() * params_[blk.ln_gamma].value.row(0).array();
            hb.array().rowwise() += params_[blk.ln_beta].value.row(0).array();
            params_[blk.w_in].grad.noalias() += hb.transpose() * du;
            params_[blk.b_in].grad.row(0) += du.colwise().sum();
            Mat dhb;
            dhb.noalias() = du * params_[blk.w_in].value.transpose();

            params_[blk.ln_gamma].grad.row(0) += (dhb.array() * bc.xhat.array()).colwise().sum().matrix();
            params_[blk.ln_beta].grad.row(0) += dhb.colwise().sum();
            dx += layer_norm_backward(dhb, bc.xhat, bc.inv_std, params_[blk.ln_gamma].value);
        }

        // embeddings
        Mat &gec = params_[emb_code_].grad;
        Mat &ges = params_[emb_slot_].grad;
        Mat &ged = params_[emb_dow_].grad;
        for (int k = 0; k < SlotGrid::kSlots; ++k) {
            gec.row(cache.tokens[static_cast<size_t>(k)]) += dx.row(k);
            ges.row(k) += dx.row(k);
            ged.row(cache.dow) += dx.row(k);
        }
    }

    void zero_grad() {
        for (Param &p : params_) {
            p.grad.setZero();
        }
    }

    /// Adam step over trainable groups; classic L2 enters through the
    /// gradient. Frozen groups keep stale moments by design.
    void adam_step(double lr, const FreezeState &freeze, double weight_decay = 0.0,
                   double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
        ++adam_t_;
        double bc1 = 1.0 - std::pow(beta1, adam_t_);
        double bc2 = 1.0 - std::pow(beta2, adam_t_);
        for (Param &p : params_) {
            if (!freeze.is_trainable(p.group)) {
                continue;
            }
            Mat g = p.grad;
            if (weight_decay > 0.0) {
                g += static_cast<Scalar>(weight_decay) * p.value;
            }
            p.m = static_cast<Scalar>(beta1) * p.m + static_cast<Scalar>(1.0 - beta1) * g;
            p.v = (static_cast<Scalar>(beta2) * p.v.array() +
                   static_cast<Scalar>(1.0 - beta2) * g.array().square())
                      .matrix();
            Mat mhat = p.m / static_cast<Scalar>(bc1);
            Mat vhat = p.v / static_cast<Scalar>(bc2);
            p.value.array() -=
                static_cast<Scalar>(lr) * mhat.array() / (vhat.array().sqrt() + static_cast<Scalar>(eps));
        }
    }

    // ---- checkpoint io ----

    static constexpr const char *kMagic = "MOBSYNTH-CKPT1";

    void save(const std::string &path, const nlohmann::json &training_config = {},
              uint64_t seed = 0) const {
        nlohmann::json header;
        header["format"] = kMagic;
        header["config"] = {{"width", cfg_.width}, {"blocks", cfg_.blocks}, {"dropout", cfg_.dropout}};
        header["seed"] = seed;
        if (!training_config.is_null()) {
            header["training"] = training_config;
        }
        nlohmann::json tensors = nlohmann::json::array();
        std::vector<float> blob;
        for (const Param &p : params_) {
            tensors.push_back({{"name", p.name},
                               {"group", layer_group_name(p.group)},
                               {"rows", p.value.rows()},
                               {"cols", p.value.cols()}});
            for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
                for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
                    blob.push_back(static_cast<float>(p.value(i, j)));
                }
            }
        }
        header["tensors"] = tensors;
        header["param_count"] = blob.size();
        header["param_fnv64"] = to_hex(fnv1a64(blob.data(), blob.size() * sizeof(float)));

        std::string hjson = header.dump();
        std::ofstream out(path, std::ios::binary);
        require(out.good(), "cannot open checkpoint for writing: " + path);
        uint64_t hlen = hjson.size();
        out.write(kMagic, static_cast<std::streamsize>(std::string(kMagic).size()));
        out.put('\n');
        out.write(reinterpret_cast<const char *>(&hlen), sizeof(hlen));
        out.write(hjson.data(), static_cast<std::streamsize>(hjson.size()));
        out.write(reinterpret_cast<const char *>(blob.data()),
                  static_cast<std::streamsize>(blob.size() * sizeof(float)));
        require(out.good(), "checkpoint write failed: " + path);
    }

    static Model load(const std::string &path) {
        std::ifstream in(path, std::ios::binary);
        require(in.good(), "cannot open checkpoint: " + path);
        std::string magic(std::string(kMagic).size(), '\0');
        in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
        require(magic == kMagic && in.get() == '\n', "not a model checkpoint: " + path);
        uint64_t hlen = 0;
        in.read(reinterpret_cast<char *>(&hlen), sizeof(hlen));
        std::string hjson(hlen, '\0');
        in.read(hjson.data(), static_cast<std::streamsize>(hlen));
        require(in.good(), "truncated checkpoint header: " + path);
        nlohmann::json header = nlohmann::json::parse(hjson);

        ModelConfig cfg;
        cfg.width = header.at("config").at("width").get<int>();
        cfg.blocks = header.at("config").at("blocks").get<int>();
        cfg.dropout = header.at("config").at("dropout").get<double>();
        Model model(cfg, 0);

        size_t count = header.at("param_count").get<size_t>();
        std::vector<float> blob(count);
        in.read(reinterpret_cast<char *>(blob.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        require(in.good(), "truncated checkpoint params: " + path);
        std::string want = header.at("param_fnv64").get<std::string>();
        std::string got = to_hex(fnv1a64(blob.data(), blob.size() * sizeof(float)));
        require(want == got, "checkpoint parameter hash mismatch: " + path);

        const nlohmann::json &tensors = header.at("tensors");
        require(tensors.size() == model.params_.size(), "checkpoint tensor list mismatch: " + path);
        size_t off = 0;
        for (size_t t = 0; t < model.params_.size(); ++t) {
            Param &p = model.params_[t];
            require(tensors[t].at("name") == p.name &&
                        tensors[t].at("rows").get<Eigen::Index>() == p.value.rows() &&
                        tensors[t].at("cols").get<Eigen::Index>() == p.value.cols(),
                    "checkpoint tensor layout mismatch at " + p.name);
            for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
                for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
                    p.value(i, j) = static_cast<Scalar>(blob[off++]);
                }
            }
        }
        return model;
    }

  private:
    size_t add_param(std::string name, LayerGroup group, Eigen::Index rows, Eigen::Index cols) {
        Param p;
        p.name = std::move(name);
        p.group = group;
        p.value = Mat::Zero(rows, cols);
        params_.push_back(std::move(p));
        return params_.size() - 1;
    }

    static void layer_norm(const Mat &x, const Mat & /*gamma*/, const Mat & /*beta*/, Mat &xhat,
                           Eigen::Matrix<Scalar, Eigen::Dynamic, 1> &inv_std) {
        const auto d = static_cast<Scalar>(x.cols());
        xhat.resize(x.rows(), x.cols());
        inv_std.resize(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            Scalar mu = x.row(i).mean();
            Scalar var = (x.row(i).array() - mu).square().sum() / d;
            Scalar is = Scalar(1) / std::sqrt(var + Scalar(1e-5));
            inv_std(i) = is;
            xhat.row(i) = (x.row(i).array() - mu) * is;
        }
    }

    static Mat layer_norm_backward(const Mat &dh, const Mat &xhat,
                                   const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> &inv_std,
                                   const Mat &gamma) {
        Mat dxhat = dh.array().rowwise() * gamma.row(0).array();
        Mat dx(dh.rows(), dh.cols());
        const auto d = static_cast<Scalar>(dh.cols());
        for (Eigen::Index i = 0; i < dh.rows(); ++i) {
            Scalar mean_d = dxhat.row(i).mean();
            Scalar mean_dx = (dxhat.row(i).array() * xhat.row(i).array()).sum() / d;
            dx.row(i) =
                ((dxhat.row(i).array() - mean_d) - xhat.row(i).array() * mean_dx) * inv_std(i);
        }
        return dx;
    }

    static Mat gelu(const Mat &x) {
        return x.unaryExpr([](Scalar v) {
            return Scalar(0.5) * v * (Scalar(1) + Scalar(std::erf(static_cast<double>(v) / std::sqrt(2.0))));
        });
    }

    static Mat gelu_grad(const Mat &x) {
        return x.unaryExpr([](Scalar v) {
            double xv = static_cast<double>(v);
            double cdf = 0.5 * (1.0 + std::erf(xv / std::sqrt(2.0)));
            double pdf = std::exp(-0.5 * xv * xv) / std::sqrt(2.0 * 3.14159265358979323846);
            return static_cast<Scalar>(cdf + xv * pdf);
        });
    }

    ModelConfig cfg_;
    std::vector<Param> params_;
    std::vector<Block> blocks_;
    size_t emb_code_ = 0, emb_slot_ = 0, emb_dow_ = 0;
    size_t head_ln_gamma_ = 0, head_ln_beta_ = 0, head_w_ = 0, head_b_ = 0;
    long adam_t_ = 0;
};

using ModelF = Model<float>;

} // namespace mobsynth
