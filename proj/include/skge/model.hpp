#ifndef SKGE_MODEL_HPP
#define SKGE_MODEL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skge/dataset.hpp"
#include "skge/matrix.hpp"
#include "skge/sphere.hpp"

namespace skge {

enum class ModelKind { TransE, Skge, SkgeFixedNorm, SkgeLearnableScale };

const char* kind_name(ModelKind k);
ModelKind kind_from_name(const std::string& name);
inline bool is_spherical(ModelKind k) { return k != ModelKind::TransE; }

// Width of the latent entity rows. TransE and the spherized variants keep
// latent vectors in R^D; the fixed-norm ablation normalizes the embedding
// itself, so its latents live directly in the ambient R^(D+1).
int latent_width(ModelKind kind, int dim);
// Relation rows: R^D for TransE, ambient R^(D+1) for all spherical variants.
int relation_width(ModelKind kind, int dim);

template <typename T>
struct Model {
    ModelKind kind = ModelKind::TransE;
    int dim = 0;
    SpherizationParams<T> spherization;  // scale is the learnable s for SkgeLearnableScale
    Matrix<T> entity_latent;             // |E| x latent_width
    Matrix<T> relation_vecs;             // |R| x relation_width

    int64_t num_entities() const { return entity_latent.rows(); }
    int64_t num_relations() const { return relation_vecs.rows(); }
};

// Uniform init on [-6/sqrt(D), +6/sqrt(D)], reproducible from the seed.
template <typename T>
Model<T> init_model(ModelKind kind, int64_t num_entities, int64_t num_relations, int dim,
                    const SpherizationParams<T>& sphere_params, uint64_t seed);

// Scratch buffers so the scoring/gradient hot path never allocates.
template <typename T>
struct ModelWorkspace {
    SpherizeCache<T> head_cache, tail_cache;
    std::vector<T> head_point, tail_point, translated, predicted, diff;
    std::vector<T> grad_point, grad_translated, grad_latent;

    void resize(int ambient) {
        head_point.resize(ambient);
        tail_point.resize(ambient);
        translated.resize(ambient);
        predicted.resize(ambient);
        diff.resize(ambient);
        grad_point.resize(ambient);
        grad_translated.resize(ambient);
        grad_latent.resize(ambient);
    }
};

// Entity representation used by the model's distance: Phi(v) for spherical
// variants, the latent vector itself for TransE.
template <typename T>
void entity_point(const Model<T>& model, EntityId e, std::span<T> out,
                  SpherizeCache<T>* cache = nullptr);

// One row per entity, each row entity_point(e). Built once per evaluation
// pass; scoring against it is bit-identical to the per-triple path.
template <typename T>
Matrix<T> build_entity_table(const Model<T>& model);

// || e_h + r - e_t ||_2 per triple (TransE only).
template <typename T>
void transe_score(const Model<T>& model, std::span<const EntityId> h,
                  std::span<const RelationId> r, std::span<const EntityId> t,
                  std::span<T> out);

// Translate-then-project score for the spherical variants:
// Phi(v_h) + r is projected back to the radius-R sphere and compared to
// Phi(v_t) by chord distance. Bounded by [0, 2R].
template <typename T>
void skge_score(const Model<T>& model, std::span<const EntityId> h,
                std::span<const RelationId> r, std::span<const EntityId> t,
                std::span<T> out, ModelWorkspace<T>& ws);

// Kind dispatch over the two scorers above.
template <typename T>
void score_batch(const Model<T>& model, std::span<const EntityId> h,
                 std::span<const RelationId> r, std::span<const EntityId> t,
                 std::span<T> out, ModelWorkspace<T>& ws);

// R v / (||v|| + eps) - the fixed-norm ablation's replacement for spherize.
template <typename T>
void fixednorm_map(std::span<const T> v, T radius, T eps, std::span<T> out);

// Scores of (h, r, t) for every candidate tail t, via the entity table.
template <typename T>
void score_all_tails(const Model<T>& model, const Matrix<T>& table, EntityId h, RelationId r,
                     std::span<T> out, ModelWorkspace<T>& ws);
// Scores for every candidate head. Spherical variants run translate-project
// per candidate; the operator has no closed-form inverse.
template <typename T>
void score_all_heads(const Model<T>& model, const Matrix<T>& table, RelationId r, EntityId t,
                     std::span<T> out, ModelWorkspace<T>& ws);

// Convenience overloads that build the table internally.
template <typename T>
std::vector<T> score_all_tails(const Model<T>& model, EntityId h, RelationId r);
template <typename T>
std::vector<T> score_all_heads(const Model<T>& model, RelationId r, EntityId t);

// Per-row gradient accumulator. Only rows referenced since the last clear()
// hold meaningful values; `touched_*` list them (deduplicated).
template <typename T>
struct Gradients {
    Matrix<T> d_entity;
    Matrix<T> d_relation;
    T d_scale = T(0);
    std::vector<EntityId> touched_entities;
    std::vector<RelationId> touched_relations;

    void init(int64_t num_entities, int64_t num_relations, int ent_width, int rel_width);
    void clear();  // zeroes only previously touched rows
    void touch_entity(EntityId e);
    void touch_relation(RelationId r);

private:
    std::vector<uint8_t> entity_mark_, relation_mark_;
};

// Accumulate d(sum_i upstream_i * score_i)/d(params) into `grads`.
// Duplicate indices within the batch add up. Rows referenced by the batch are
// marked touched even when their gradient contribution is zero.
template <typename T>
void model_gradients(const Model<T>& model, std::span<const EntityId> h,
                     std::span<const RelationId> r, std::span<const EntityId> t,
                     std::span<const T> upstream, Gradients<T>& grads, ModelWorkspace<T>& ws);

}  // namespace skge

#endif  // SKGE_MODEL_HPP
