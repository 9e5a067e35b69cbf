#include "skge/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "skge/evaluator.hpp"

namespace skge {

namespace {

// Rejection-sampled uniform draw on [0, bound), unbiased for any bound.
uint64_t uniform_below(std::mt19937_64& rng, uint64_t bound) {
    uint64_t rem = UINT64_MAX % bound + 1;
    if (rem == bound) rem = 0;
    const uint64_t threshold = ~uint64_t(0) - rem + 1;  // 2^64 - rem
    uint64_t x = rng();
    if (rem != 0) {
        while (x >= threshold) x = rng();
    }
    return x % bound;
}

void fisher_yates(std::vector<int64_t>& order, std::mt19937_64& rng) {
    for (size_t i = order.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(uniform_below(rng, i));
        std::swap(order[i - 1], order[j]);
    }
}

template <typename T>
void adam_update_row(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                     const AdamParams& p, double bc1, double bc2) {
    for (size_t j = 0; j < param.size(); ++j) {
        const double g = static_cast<double>(grad[j]);
        if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite gradient");
        const double m_new = p.beta1 * static_cast<double>(m[j]) + (1.0 - p.beta1) * g;
        const double v_new = p.beta2 * static_cast<double>(v[j]) + (1.0 - p.beta2) * g * g;
        m[j] = static_cast<T>(m_new);
        v[j] = static_cast<T>(v_new);
        const double m_hat = m_new / bc1;
        const double v_hat = v_new / bc2;
        param[j] = static_cast<T>(static_cast<double>(param[j]) -
                                  p.lr * m_hat / (std::sqrt(v_hat) + p.eps));
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (dim < 1) throw std::invalid_argument("TrainConfig: dim must be >= 1");
    if (!(margin > 0)) throw std::invalid_argument("TrainConfig: margin must be > 0");
    if (!(lr >= 0)) throw std::invalid_argument("TrainConfig: lr must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (negatives_per_positive < 1)
        throw std::invalid_argument("TrainConfig: negatives_per_positive must be >= 1");
    if (eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
    sphere_params<double>().validate();
}

std::string EpochRecord::to_json() const {
    nlohmann::json j;
    j["epoch"] = epoch;
    j["mean_loss"] = mean_loss;
    if (val_mrr) j["val_mrr"] = *val_mrr;
    j["seconds"] = seconds;
    return j.dump();
}

template <typename T>
void AdamState<T>::init(const Model<T>& model) {
    entity_m = Matrix<T>(model.entity_latent.rows(), model.entity_latent.cols());
    entity_v = Matrix<T>(model.entity_latent.rows(), model.entity_latent.cols());
    relation_m = Matrix<T>(model.relation_vecs.rows(), model.relation_vecs.cols());
    relation_v = Matrix<T>(model.relation_vecs.rows(), model.relation_vecs.cols());
    scale_m = T(0);
    scale_v = T(0);
    step = 0;
}

template <typename T>
void adam_step(Model<T>& model, const Gradients<T>& grads, AdamState<T>& state,
               const AdamParams& params) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(params.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(params.beta2, static_cast<double>(state.step));

    for (EntityId e : grads.touched_entities) {
        adam_update_row<T>(model.entity_latent.row(e), grads.d_entity.row(e),
                           state.entity_m.row(e), state.entity_v.row(e), params, bc1, bc2);
    }
    for (RelationId r : grads.touched_relations) {
        adam_update_row<T>(model.relation_vecs.row(r), grads.d_relation.row(r),
                           state.relation_m.row(r), state.relation_v.row(r), params, bc1, bc2);
    }
    if (model.kind == ModelKind::SkgeLearnableScale) {
        const double g = static_cast<double>(grads.d_scale);
        if (!std::isfinite(g)) throw std::runtime_error("adam_step: non-finite scale gradient");
        const double m_new = params.beta1 * static_cast<double>(state.scale_m) +
                             (1.0 - params.beta1) * g;
        const double v_new = params.beta2 * static_cast<double>(state.scale_v) +
                             (1.0 - params.beta2) * g * g;
        state.scale_m = static_cast<T>(m_new);
        state.scale_v = static_cast<T>(v_new);
        double s = static_cast<double>(model.spherization.scale) -
                   params.lr * (m_new / bc1) / (std::sqrt(v_new / bc2) + params.eps);
        if (s < 1e-6) s = 1e-6;  // the sigmoid gain must stay positive
        model.spherization.scale = static_cast<T>(s);
    }
}

void sample_negatives(std::span<const Triple> batch, int64_t num_entities, int k,
                      std::mt19937_64& rng, const FilterIndex* filter,
                      std::vector<Triple>& out) {
    if (num_entities < 2) throw std::invalid_argument("sample_negatives: need at least 2 entities");
    if (k < 1) throw std::invalid_argument("sample_negatives: k must be >= 1");
    out.clear();
    out.reserve(batch.size() * static_cast<size_t>(k));
    constexpr int kMaxResample = 100;
    for (const Triple& pos : batch) {
        for (int j = 0; j < k; ++j) {
            Triple neg = pos;
            for (int attempt = 0; attempt < kMaxResample; ++attempt) {
                neg = pos;
                const bool corrupt_head = (rng() & 1ull) == 0;
                const auto e = static_cast<EntityId>(
                    uniform_below(rng, static_cast<uint64_t>(num_entities)));
                if (corrupt_head) neg.h = e;
                else neg.t = e;
                if (!filter || !filter->contains(neg)) break;
            }
            out.push_back(neg);
        }
    }
}

template <typename T>
double margin_loss(std::span<const T> s_pos, std::span<const T> s_neg, int k, double gamma,
                   std::span<T> grad_pos, std::span<T> grad_neg) {
    const size_t n_pos = s_pos.size();
    if (k < 1 || s_neg.size() != n_pos * static_cast<size_t>(k))
        throw std::invalid_argument("margin_loss: negative block must be positives x k");
    if (grad_pos.size() != n_pos || grad_neg.size() != s_neg.size())
        throw std::invalid_argument("margin_loss: gradient buffer shape mismatch");
    const size_t n_pairs = s_neg.size();
    const T unit = T(1) / static_cast<T>(n_pairs);
    double total = 0.0;
    for (size_t i = 0; i < n_pos; ++i) {
        grad_pos[i] = T(0);
        for (int j = 0; j < k; ++j) {
            const size_t idx = i * static_cast<size_t>(k) + static_cast<size_t>(j);
            const double hinge = gamma + static_cast<double>(s_pos[i]) -
                                 static_cast<double>(s_neg[idx]);
            if (hinge > 0.0) {
                total += hinge;
                grad_pos[i] += unit;
                grad_neg[idx] = -unit;
            } else {
                grad_neg[idx] = T(0);
            }
        }
    }
    return total / static_cast<double>(n_pairs);
}

template <typename T>
TrainerState<T>::TrainerState(const Model<T>& model, const TrainConfig& cfg)
    : shuffle_rng(cfg.seed), negative_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull) {
    adam.init(model);
    grads.init(model.num_entities(), model.num_relations(),
               static_cast<int>(model.entity_latent.cols()),
               static_cast<int>(model.relation_vecs.cols()));
    ws.resize(static_cast<int>(model.relation_vecs.cols()));
}

template <typename T>
double train_epoch(Model<T>& model, const EncodedSplit& train, const TrainConfig& cfg,
                   const FilterIndex* filter, TrainerState<T>& state) {
    if (train.triples.empty()) throw std::invalid_argument("train_epoch: empty training split");
    const int64_t n = train.size();
    const int k = cfg.negatives_per_positive;
    const AdamParams adam_params{cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};

    if (static_cast<int64_t>(state.order.size()) != n) {
        state.order.resize(static_cast<size_t>(n));
        for (int64_t i = 0; i < n; ++i) state.order[static_cast<size_t>(i)] = i;
    }
    fisher_yates(state.order, state.shuffle_rng);

    double loss_sum = 0.0;
    int64_t pair_count = 0;
    for (int64_t start = 0; start < n; start += cfg.batch_size) {
        const int64_t stop = std::min(n, start + cfg.batch_size);
        const size_t b = static_cast<size_t>(stop - start);

        state.batch_pos.clear();
        for (int64_t i = start; i < stop; ++i)
            state.batch_pos.push_back(train.triples[static_cast<size_t>(state.order[static_cast<size_t>(i)])]);

        sample_negatives(state.batch_pos, model.num_entities(), k, state.negative_rng,
                         cfg.filtered_corruption ? filter : nullptr, state.negatives);

        state.pos_h.resize(b);
        state.pos_r.resize(b);
        state.pos_t.resize(b);
        for (size_t i = 0; i < b; ++i) {
            state.pos_h[i] = state.batch_pos[i].h;
            state.pos_r[i] = state.batch_pos[i].r;
            state.pos_t[i] = state.batch_pos[i].t;
        }
        const size_t bk = b * static_cast<size_t>(k);
        state.neg_h.resize(bk);
        state.neg_r.resize(bk);
        state.neg_t.resize(bk);
        for (size_t i = 0; i < bk; ++i) {
            state.neg_h[i] = state.negatives[i].h;
            state.neg_r[i] = state.negatives[i].r;
            state.neg_t[i] = state.negatives[i].t;
        }

        state.s_pos.resize(b);
        state.s_neg.resize(bk);
        state.g_pos.resize(b);
        state.g_neg.resize(bk);
        score_batch<T>(model, state.pos_h, state.pos_r, state.pos_t, state.s_pos, state.ws);
        score_batch<T>(model, state.neg_h, state.neg_r, state.neg_t, state.s_neg, state.ws);

        const double batch_loss = margin_loss<T>(state.s_pos, state.s_neg, k, cfg.margin,
                                                 state.g_pos, state.g_neg);
        if (!std::isfinite(batch_loss)) throw std::runtime_error("train_epoch: non-finite loss");
        loss_sum += batch_loss * static_cast<double>(bk);
        pair_count += static_cast<int64_t>(bk);

        state.grads.clear();
        model_gradients<T>(model, state.pos_h, state.pos_r, state.pos_t, state.g_pos,
                           state.grads, state.ws);
        model_gradients<T>(model, state.neg_h, state.neg_r, state.neg_t, state.g_neg,
                           state.grads, state.ws);
        adam_step<T>(model, state.grads, state.adam, adam_params);

        if (model.kind == ModelKind::TransE && cfg.transe_normalize_entities) {
            for (EntityId e : state.grads.touched_entities) {
                auto row = model.entity_latent.row(e);
                T sq = T(0);
                for (T x : row) sq += x * x;
                const T norm = std::sqrt(sq);
                if (norm > T(0)) {
                    for (T& x : row) x /= norm;
                }
            }
        }
    }
    return loss_sum / static_cast<double>(pair_count);
}

TrainResult train(Model<float>& model, const Dataset& dataset, const TrainConfig& cfg,
                  int eval_threads) {
    cfg.validate();
    TrainerState<float> state(model, cfg);
    TrainResult result;
    result.best_model = model;

    int bad_evals = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double mean_loss = train_epoch<float>(model, dataset.train, cfg,
                                                    &dataset.filter, state);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = mean_loss;
        if (cfg.record_timing) {
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }

        bool stop = false;
        if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
            const EvalResult ev = evaluate(model, dataset.valid, dataset.filter, eval_threads);
            rec.val_mrr = ev.overall.mrr;
            if (ev.overall.mrr > result.best_val_mrr) {
                result.best_val_mrr = ev.overall.mrr;
                result.best_epoch = epoch;
                result.best_model = model;
                bad_evals = 0;
            } else {
                ++bad_evals;
                if (bad_evals >= cfg.patience) stop = true;
            }
        }
        result.log.push_back(rec);
        if (stop) break;
    }
    if (result.best_epoch == 0) result.best_model = model;
    return result;
}

void write_train_log(const TrainLog& log, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open log file for writing: " + path);
    for (const EpochRecord& rec : log) out << rec.to_json() << '\n';
    if (!out) throw std::runtime_error("I/O error while writing: " + path);
}

namespace {

constexpr int kCheckpointVersion = 1;

void write_rows_f32(std::ofstream& out, const Matrix<float>& m) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(float)));
}

}  // namespace

void save_checkpoint(const Model<float>& model, const std::string& path) {
    nlohmann::json header{
        {"format_version", kCheckpointVersion},
        {"kind", kind_name(model.kind)},
        {"entities", model.num_entities()},
        {"relations", model.num_relations()},
        {"dim", model.dim},
        {"radius", static_cast<double>(model.spherization.radius)},
        {"delta", static_cast<double>(model.spherization.angle_margin)},
        {"epsilon", static_cast<double>(model.spherization.epsilon)},
        {"scale", static_cast<double>(model.spherization.scale)},
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out << header.dump() << '\n';
    write_rows_f32(out, model.entity_latent);
    write_rows_f32(out, model.relation_vecs);
    if (!out) throw std::runtime_error("I/O error while writing checkpoint: " + path);
}

Model<float> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string header_line;
    if (!std::getline(in, header_line))
        throw std::runtime_error("checkpoint missing header line: " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("checkpoint header is not valid JSON (" + path +
                                 "): " + e.what());
    }

    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
        std::ostringstream msg;
        msg << "checkpoint format version mismatch: file has " << version << ", expected "
            << kCheckpointVersion;
        throw std::runtime_error(msg.str());
    }

    Model<float> model;
    model.kind = kind_from_name(header.at("kind").get<std::string>());
    model.dim = header.at("dim").get<int>();
    const int64_t entities = header.at("entities").get<int64_t>();
    const int64_t relations = header.at("relations").get<int64_t>();
    model.spherization.radius = header.at("radius").get<float>();
    model.spherization.angle_margin = header.at("delta").get<float>();
    model.spherization.epsilon = header.at("epsilon").get<float>();
    model.spherization.scale = header.at("scale").get<float>();
    if (entities <= 0 || relations <= 0 || model.dim < 1)
        throw std::runtime_error("checkpoint header has non-positive shape fields: " + path);
    model.spherization.validate();

    model.entity_latent = Matrix<float>(entities, latent_width(model.kind, model.dim));
    model.relation_vecs = Matrix<float>(relations, relation_width(model.kind, model.dim));
    const std::streamsize ent_bytes =
        static_cast<std::streamsize>(model.entity_latent.size() * sizeof(float));
    const std::streamsize rel_bytes =
        static_cast<std::streamsize>(model.relation_vecs.size() * sizeof(float));
    in.read(reinterpret_cast<char*>(model.entity_latent.data()), ent_bytes);
    if (in.gcount() != ent_bytes)
        throw std::runtime_error("checkpoint payload shorter than header implies: " + path);
    in.read(reinterpret_cast<char*>(model.relation_vecs.data()), rel_bytes);
    if (in.gcount() != rel_bytes)
        throw std::runtime_error("checkpoint payload shorter than header implies: " + path);
    char extra;
    if (in.read(&extra, 1); in.gcount() != 0)
        throw std::runtime_error("checkpoint payload longer than header implies: " + path);
    return model;
}

template struct AdamState<float>;
template struct AdamState<double>;
template struct TrainerState<float>;
template struct TrainerState<double>;
template void adam_step<float>(Model<float>&, const Gradients<float>&, AdamState<float>&,
                               const AdamParams&);
template void adam_step<double>(Model<double>&, const Gradients<double>&, AdamState<double>&,
                                const AdamParams&);
template double margin_loss<float>(std::span<const float>, std::span<const float>, int, double,
                                   std::span<float>, std::span<float>);
template double margin_loss<double>(std::span<const double>, std::span<const double>, int,
                                    double, std::span<double>, std::span<double>);
template double train_epoch<float>(Model<float>&, const EncodedSplit&, const TrainConfig&,
                                   const FilterIndex*, TrainerState<float>&);
template double train_epoch<double>(Model<double>&, const EncodedSplit&, const TrainConfig&,
                                    const FilterIndex*, TrainerState<double>&);

}  // namespace skge
