#include "skge/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <stdexcept>

namespace skge {

namespace {

// Top 24 bits of one engine draw -> uniform in [0, 1). The same bits give the
// same value in float and double, so both instantiations initialize alike.
template <typename T>
T uniform01(std::mt19937_64& rng) {
    const auto bits = static_cast<uint32_t>(rng() >> 40);
    return static_cast<T>(bits) * (T(1) / T(16777216));
}

template <typename T>
int ambient_width(const Model<T>& model) {
    return is_spherical(model.kind) ? model.dim + 1 : model.dim;
}

template <typename T>
void check_entity(const Model<T>& model, EntityId e) {
    if (e < 0 || e >= model.num_entities())
        throw std::out_of_range("entity id out of range: " + std::to_string(e));
}

template <typename T>
void check_relation(const Model<T>& model, RelationId r) {
    if (r < 0 || r >= model.num_relations())
        throw std::out_of_range("relation id out of range: " + std::to_string(r));
}

template <typename T>
T l2_distance(std::span<const T> a, std::span<const T> b) {
    T sq = T(0);
    for (size_t i = 0; i < a.size(); ++i) {
        const T d = a[i] - b[i];
        sq += d * d;
    }
    return std::sqrt(sq);
}

}  // namespace

const char* kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::TransE: return "TransE";
        case ModelKind::Skge: return "SKGE";
        case ModelKind::SkgeFixedNorm: return "SkgeFixedNorm";
        case ModelKind::SkgeLearnableScale: return "SkgeLearnableScale";
    }
    return "?";
}

ModelKind kind_from_name(const std::string& name) {
    std::string s;
    s.reserve(name.size());
    for (char c : name) {
        if (c == '-' || c == '_') continue;
        s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (s == "transe") return ModelKind::TransE;
    if (s == "skge") return ModelKind::Skge;
    if (s == "skgefixednorm" || s == "fixednorm") return ModelKind::SkgeFixedNorm;
    if (s == "skgelearnablescale" || s == "learnablescale") return ModelKind::SkgeLearnableScale;
    throw std::invalid_argument("unknown model kind: \"" + name + "\"");
}

int latent_width(ModelKind kind, int dim) {
    return kind == ModelKind::SkgeFixedNorm ? dim + 1 : dim;
}

int relation_width(ModelKind kind, int dim) {
    return is_spherical(kind) ? dim + 1 : dim;
}

template <typename T>
Model<T> init_model(ModelKind kind, int64_t num_entities, int64_t num_relations, int dim,
                    const SpherizationParams<T>& sphere_params, uint64_t seed) {
    if (num_entities <= 0 || num_relations <= 0)
        throw std::invalid_argument("init_model: vocabulary sizes must be positive");
    if (dim < 1) throw std::invalid_argument("init_model: dimension must be >= 1");
    sphere_params.validate();

    Model<T> model;
    model.kind = kind;
    model.dim = dim;
    model.spherization = sphere_params;
    model.entity_latent = Matrix<T>(num_entities, latent_width(kind, dim));
    model.relation_vecs = Matrix<T>(num_relations, relation_width(kind, dim));

    const T bound = T(6) / std::sqrt(static_cast<T>(dim));
    std::mt19937_64 rng(seed);
    auto draw = [&rng, bound]() { return (T(2) * uniform01<T>(rng) - T(1)) * bound; };
    for (size_t i = 0; i < model.entity_latent.size(); ++i) model.entity_latent.data()[i] = draw();
    for (size_t i = 0; i < model.relation_vecs.size(); ++i) model.relation_vecs.data()[i] = draw();
    return model;
}

template <typename T>
void fixednorm_map(std::span<const T> v, T radius, T eps, std::span<T> out) {
    project_to_sphere(v, radius, eps, out);
}

template <typename T>
void entity_point(const Model<T>& model, EntityId e, std::span<T> out, SpherizeCache<T>* cache) {
    check_entity(model, e);
    const auto latent = model.entity_latent.row(e);
    switch (model.kind) {
        case ModelKind::TransE:
            if (out.size() != latent.size())
                throw std::invalid_argument("entity_point: dimension mismatch");
            std::copy(latent.begin(), latent.end(), out.begin());
            break;
        case ModelKind::SkgeFixedNorm:
            fixednorm_map(latent, model.spherization.radius, model.spherization.epsilon, out);
            break;
        case ModelKind::Skge:
        case ModelKind::SkgeLearnableScale:
            spherize_forward(latent, model.spherization, out, cache);
            break;
    }
}

template <typename T>
Matrix<T> build_entity_table(const Model<T>& model) {
    Matrix<T> table(model.num_entities(), ambient_width(model));
    for (int64_t e = 0; e < model.num_entities(); ++e) {
        entity_point(model, static_cast<EntityId>(e), table.row(e));
    }
    return table;
}

template <typename T>
void transe_score(const Model<T>& model, std::span<const EntityId> h,
                  std::span<const RelationId> r, std::span<const EntityId> t,
                  std::span<T> out) {
    if (model.kind != ModelKind::TransE)
        throw std::invalid_argument("transe_score: model kind is not TransE");
    if (h.size() != r.size() || h.size() != t.size() || h.size() != out.size())
        throw std::invalid_argument("transe_score: batch length mismatch");
    for (size_t i = 0; i < h.size(); ++i) {
        check_entity(model, h[i]);
        check_relation(model, r[i]);
        check_entity(model, t[i]);
        const auto eh = model.entity_latent.row(h[i]);
        const auto rr = model.relation_vecs.row(r[i]);
        const auto et = model.entity_latent.row(t[i]);
        T sq = T(0);
        for (int j = 0; j < model.dim; ++j) {
            const T d = (eh[j] + rr[j]) - et[j];
            sq += d * d;
        }
        out[i] = std::sqrt(sq);
    }
}

template <typename T>
void skge_score(const Model<T>& model, std::span<const EntityId> h,
                std::span<const RelationId> r, std::span<const EntityId> t,
                std::span<T> out, ModelWorkspace<T>& ws) {
    if (!is_spherical(model.kind))
        throw std::invalid_argument("skge_score: model kind is not a spherical variant");
    if (h.size() != r.size() || h.size() != t.size() || h.size() != out.size())
        throw std::invalid_argument("skge_score: batch length mismatch");
    const int ambient = ambient_width(model);
    ws.resize(ambient);
    for (size_t i = 0; i < h.size(); ++i) {
        check_relation(model, r[i]);
        entity_point(model, h[i], std::span<T>(ws.head_point));
        entity_point(model, t[i], std::span<T>(ws.tail_point));
        const auto rr = model.relation_vecs.row(r[i]);
        for (int j = 0; j < ambient; ++j) ws.translated[j] = ws.head_point[j] + rr[j];
        project_to_sphere(std::span<const T>(ws.translated), model.spherization.radius,
                          model.spherization.epsilon, std::span<T>(ws.predicted));
        out[i] = l2_distance(std::span<const T>(ws.predicted), std::span<const T>(ws.tail_point));
    }
}

template <typename T>
void score_batch(const Model<T>& model, std::span<const EntityId> h,
                 std::span<const RelationId> r, std::span<const EntityId> t,
                 std::span<T> out, ModelWorkspace<T>& ws) {
    if (model.kind == ModelKind::TransE) {
        transe_score(model, h, r, t, out);
    } else {
        skge_score(model, h, r, t, out, ws);
    }
}

template <typename T>
void score_all_tails(const Model<T>& model, const Matrix<T>& table, EntityId h, RelationId r,
                     std::span<T> out, ModelWorkspace<T>& ws) {
    check_entity(model, h);
    check_relation(model, r);
    if (static_cast<int64_t>(out.size()) != model.num_entities())
        throw std::invalid_argument("score_all_tails: output length must be |E|");
    const int ambient = ambient_width(model);
    ws.resize(ambient);
    const auto rr = model.relation_vecs.row(r);
    const auto eh = table.row(h);
    if (model.kind == ModelKind::TransE) {
        for (int64_t t = 0; t < model.num_entities(); ++t) {
            const auto et = table.row(t);
            T sq = T(0);
            for (int j = 0; j < model.dim; ++j) {
                const T d = (eh[j] + rr[j]) - et[j];
                sq += d * d;
            }
            out[t] = std::sqrt(sq);
        }
        return;
    }
    // The prediction depends only on (h, r): project once, then measure the
    // chord to every candidate row.
    for (int j = 0; j < ambient; ++j) ws.translated[j] = eh[j] + rr[j];
    project_to_sphere(std::span<const T>(ws.translated), model.spherization.radius,
                      model.spherization.epsilon, std::span<T>(ws.predicted));
    for (int64_t t = 0; t < model.num_entities(); ++t) {
        out[t] = l2_distance(std::span<const T>(ws.predicted), table.row(t));
    }
}

template <typename T>
void score_all_heads(const Model<T>& model, const Matrix<T>& table, RelationId r, EntityId t,
                     std::span<T> out, ModelWorkspace<T>& ws) {
    check_entity(model, t);
    check_relation(model, r);
    if (static_cast<int64_t>(out.size()) != model.num_entities())
        throw std::invalid_argument("score_all_heads: output length must be |E|");
    const int ambient = ambient_width(model);
    ws.resize(ambient);
    const auto rr = model.relation_vecs.row(r);
    const auto et = table.row(t);
    if (model.kind == ModelKind::TransE) {
        for (int64_t h = 0; h < model.num_entities(); ++h) {
            const auto eh = table.row(h);
            T sq = T(0);
            for (int j = 0; j < model.dim; ++j) {
                const T d = (eh[j] + rr[j]) - et[j];
                sq += d * d;
            }
            out[h] = std::sqrt(sq);
        }
        return;
    }
    for (int64_t h = 0; h < model.num_entities(); ++h) {
        const auto eh = table.row(h);
        for (int j = 0; j < ambient; ++j) ws.translated[j] = eh[j] + rr[j];
        project_to_sphere(std::span<const T>(ws.translated), model.spherization.radius,
                          model.spherization.epsilon, std::span<T>(ws.predicted));
        out[h] = l2_distance(std::span<const T>(ws.predicted), et);
    }
}

template <typename T>
std::vector<T> score_all_tails(const Model<T>& model, EntityId h, RelationId r) {
    Matrix<T> table = build_entity_table(model);
    ModelWorkspace<T> ws;
    std::vector<T> out(static_cast<size_t>(model.num_entities()));
    score_all_tails(model, table, h, r, std::span<T>(out), ws);
    return out;
}

template <typename T>
std::vector<T> score_all_heads(const Model<T>& model, RelationId r, EntityId t) {
    Matrix<T> table = build_entity_table(model);
    ModelWorkspace<T> ws;
    std::vector<T> out(static_cast<size_t>(model.num_entities()));
    score_all_heads(model, table, r, t, std::span<T>(out), ws);
    return out;
}

template <typename T>
void Gradients<T>::init(int64_t num_entities, int64_t num_relations, int ent_width,
                        int rel_width) {
    d_entity = Matrix<T>(num_entities, ent_width);
    d_relation = Matrix<T>(num_relations, rel_width);
    d_scale = T(0);
    touched_entities.clear();
    touched_relations.clear();
    entity_mark_.assign(static_cast<size_t>(num_entities), 0);
    relation_mark_.assign(static_cast<size_t>(num_relations), 0);
}

template <typename T>
void Gradients<T>::clear() {
    for (EntityId e : touched_entities) {
        auto row = d_entity.row(e);
        std::fill(row.begin(), row.end(), T(0));
        entity_mark_[static_cast<size_t>(e)] = 0;
    }
    for (RelationId r : touched_relations) {
        auto row = d_relation.row(r);
        std::fill(row.begin(), row.end(), T(0));
        relation_mark_[static_cast<size_t>(r)] = 0;
    }
    touched_entities.clear();
    touched_relations.clear();
    d_scale = T(0);
}

template <typename T>
void Gradients<T>::touch_entity(EntityId e) {
    if (!entity_mark_[static_cast<size_t>(e)]) {
        entity_mark_[static_cast<size_t>(e)] = 1;
        touched_entities.push_back(e);
    }
}

template <typename T>
void Gradients<T>::touch_relation(RelationId r) {
    if (!relation_mark_[static_cast<size_t>(r)]) {
        relation_mark_[static_cast<size_t>(r)] = 1;
        touched_relations.push_back(r);
    }
}

template <typename T>
void model_gradients(const Model<T>& model, std::span<const EntityId> h,
                     std::span<const RelationId> r, std::span<const EntityId> t,
                     std::span<const T> upstream, Gradients<T>& grads, ModelWorkspace<T>& ws) {
    if (h.size() != r.size() || h.size() != t.size() || h.size() != upstream.size())
        throw std::invalid_argument("model_gradients: batch length mismatch");
    if (grads.d_entity.rows() != model.num_entities() ||
        grads.d_entity.cols() != model.entity_latent.cols() ||
        grads.d_relation.rows() != model.num_relations() ||
        grads.d_relation.cols() != model.relation_vecs.cols())
        throw std::invalid_argument("model_gradients: gradient buffer shape mismatch");

    const int ambient = ambient_width(model);
    ws.resize(ambient);
    const bool learn_scale = model.kind == ModelKind::SkgeLearnableScale;

    for (size_t i = 0; i < h.size(); ++i) {
        check_entity(model, h[i]);
        check_relation(model, r[i]);
        check_entity(model, t[i]);
        grads.touch_entity(h[i]);
        grads.touch_relation(r[i]);
        grads.touch_entity(t[i]);
        const T u = upstream[i];
        if (u == T(0)) continue;

        if (model.kind == ModelKind::TransE) {
            const auto eh = model.entity_latent.row(h[i]);
            const auto rr = model.relation_vecs.row(r[i]);
            const auto et = model.entity_latent.row(t[i]);
            T sq = T(0);
            for (int j = 0; j < model.dim; ++j) {
                ws.diff[j] = (eh[j] + rr[j]) - et[j];
                sq += ws.diff[j] * ws.diff[j];
            }
            const T n = std::sqrt(sq);
            if (n == T(0)) continue;  // score minimum; subgradient 0
            auto gh = grads.d_entity.row(h[i]);
            auto gr = grads.d_relation.row(r[i]);
            auto gt = grads.d_entity.row(t[i]);
            for (int j = 0; j < model.dim; ++j) {
                const T g = u * ws.diff[j] / n;
                gh[j] += g;
                gr[j] += g;
                gt[j] -= g;
            }
            continue;
        }

        // Spherical variants: forward with caches, then walk the chain back.
        entity_point(model, h[i], std::span<T>(ws.head_point), &ws.head_cache);
        entity_point(model, t[i], std::span<T>(ws.tail_point), &ws.tail_cache);
        const auto rr = model.relation_vecs.row(r[i]);
        for (int j = 0; j < ambient; ++j) ws.translated[j] = ws.head_point[j] + rr[j];
        project_to_sphere(std::span<const T>(ws.translated), model.spherization.radius,
                          model.spherization.epsilon, std::span<T>(ws.predicted));
        T sq = T(0);
        for (int j = 0; j < ambient; ++j) {
            ws.diff[j] = ws.predicted[j] - ws.tail_point[j];
            sq += ws.diff[j] * ws.diff[j];
        }
        const T n = std::sqrt(sq);
        if (n == T(0)) continue;

        // d score / d predicted and d score / d tail point
        for (int j = 0; j < ambient; ++j) ws.grad_point[j] = u * ws.diff[j] / n;

        // through the projection onto the sphere, then the relation addition
        project_backward(std::span<const T>(ws.translated), model.spherization.radius,
                         model.spherization.epsilon, std::span<const T>(ws.grad_point),
                         std::span<T>(ws.grad_translated));
        auto gr = grads.d_relation.row(r[i]);
        for (int j = 0; j < ambient; ++j) gr[j] += ws.grad_translated[j];

        auto gh = grads.d_entity.row(h[i]);
        auto gt = grads.d_entity.row(t[i]);
        if (model.kind == ModelKind::SkgeFixedNorm) {
            // Phi is itself the projection map; reuse its backward.
            const auto vh = model.entity_latent.row(h[i]);
            project_backward(vh, model.spherization.radius, model.spherization.epsilon,
                             std::span<const T>(ws.grad_translated), std::span<T>(ws.grad_latent));
            for (int j = 0; j < ambient; ++j) gh[j] += ws.grad_latent[j];
            for (int j = 0; j < ambient; ++j) ws.grad_point[j] = -ws.grad_point[j];
            const auto vt = model.entity_latent.row(t[i]);
            project_backward(vt, model.spherization.radius, model.spherization.epsilon,
                             std::span<const T>(ws.grad_point), std::span<T>(ws.grad_latent));
            for (int j = 0; j < ambient; ++j) gt[j] += ws.grad_latent[j];
        } else {
            spherize_backward(ws.head_cache, model.spherization,
                              std::span<const T>(ws.grad_translated),
                              std::span<T>(ws.grad_latent).subspan(0, model.dim),
                              learn_scale ? &grads.d_scale : nullptr);
            for (int j = 0; j < model.dim; ++j) gh[j] += ws.grad_latent[j];
            for (int j = 0; j < ambient; ++j) ws.grad_point[j] = -ws.grad_point[j];
            spherize_backward(ws.tail_cache, model.spherization,
                              std::span<const T>(ws.grad_point),
                              std::span<T>(ws.grad_latent).subspan(0, model.dim),
                              learn_scale ? &grads.d_scale : nullptr);
            for (int j = 0; j < model.dim; ++j) gt[j] += ws.grad_latent[j];
        }
    }
}

#define SKGE_INSTANTIATE(T)                                                                       \
    template Model<T> init_model<T>(ModelKind, int64_t, int64_t, int,                             \
                                    const SpherizationParams<T>&, uint64_t);                      \
    template void fixednorm_map<T>(std::span<const T>, T, T, std::span<T>);                       \
    template void entity_point<T>(const Model<T>&, EntityId, std::span<T>, SpherizeCache<T>*);    \
    template Matrix<T> build_entity_table<T>(const Model<T>&);                                    \
    template void transe_score<T>(const Model<T>&, std::span<const EntityId>,                     \
                                  std::span<const RelationId>, std::span<const EntityId>,         \
                                  std::span<T>);                                                  \
    template void skge_score<T>(const Model<T>&, std::span<const EntityId>,                       \
                                std::span<const RelationId>, std::span<const EntityId>,           \
                                std::span<T>, ModelWorkspace<T>&);                                \
    template void score_batch<T>(const Model<T>&, std::span<const EntityId>,                      \
                                 std::span<const RelationId>, std::span<const EntityId>,          \
                                 std::span<T>, ModelWorkspace<T>&);                               \
    template void score_all_tails<T>(const Model<T>&, const Matrix<T>&, EntityId, RelationId,     \
                                     std::span<T>, ModelWorkspace<T>&);                           \
    template void score_all_heads<T>(const Model<T>&, const Matrix<T>&, RelationId, EntityId,     \
                                     std::span<T>, ModelWorkspace<T>&);                           \
    template std::vector<T> score_all_tails<T>(const Model<T>&, EntityId, RelationId);            \
    template std::vector<T> score_all_heads<T>(const Model<T>&, RelationId, EntityId);            \
    template struct Gradients<T>;                                                                 \
    template void model_gradients<T>(const Model<T>&, std::span<const EntityId>,                  \
                                     std::span<const RelationId>, std::span<const EntityId>,      \
                                     std::span<const T>, Gradients<T>&, ModelWorkspace<T>&);

SKGE_INSTANTIATE(float)
SKGE_INSTANTIATE(double)

#undef SKGE_INSTANTIATE

}  // namespace skge
