#ifndef SKGE_TRAINER_HPP
#define SKGE_TRAINER_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "skge/dataset.hpp"
#include "skge/matrix.hpp"
#include "skge/model.hpp"

namespace skge {

struct TrainConfig {
    int dim = 100;
    double margin = 6.0;
    double lr = 5e-4;
    int batch_size = 1024;
    int epochs = 1000;
    int negatives_per_positive = 1;
    int eval_every = 50;
    int patience = 5;
    uint64_t seed = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    bool transe_normalize_entities = true;  // per-batch unit-norm projection (TransE only)
    bool filtered_corruption = false;       // resample corruptions that hit known-true triples
    double radius = 1.0;
    double delta = 1e-4;
    double epsilon = 1e-9;
    bool record_timing = true;  // wall-clock per epoch in the log; off for bit-exact logs

    void validate() const;
    template <typename T>
    SpherizationParams<T> sphere_params() const {
        return SpherizationParams<T>{static_cast<T>(radius), T(1), static_cast<T>(delta),
                                     static_cast<T>(epsilon)};
    }
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    double mean_loss = 0.0;
    std::optional<double> val_mrr;
    double seconds = 0.0;

    std::string to_json() const;
};

using TrainLog = std::vector<EpochRecord>;

struct AdamParams {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moment buffers mirror the parameter tensors; `step` counts adam_step calls.
// Updates are row-sparse: only rows touched by the current batch move, so
// untouched embeddings stay bitwise put.
template <typename T>
struct AdamState {
    Matrix<T> entity_m, entity_v;
    Matrix<T> relation_m, relation_v;
    T scale_m = T(0), scale_v = T(0);
    int64_t step = 0;

    void init(const Model<T>& model);
};

template <typename T>
void adam_step(Model<T>& model, const Gradients<T>& grads, AdamState<T>& state,
               const AdamParams& params);

// Uniform corruption: per positive, k negatives, each replacing head or tail
// (fair coin) with an entity uniform on [0, |E|). With `filter` given,
// corruptions that form known-true triples are resampled.
void sample_negatives(std::span<const Triple> batch, int64_t num_entities, int k,
                      std::mt19937_64& rng, const FilterIndex* filter,
                      std::vector<Triple>& out);

// Mean over all (positive, negative) pairs of max(0, gamma + s_pos - s_neg).
// Writes the subgradients w.r.t. the scores; exact ties contribute zero.
// s_neg is row-major positives x k, grad buffers match the score shapes.
template <typename T>
double margin_loss(std::span<const T> s_pos, std::span<const T> s_neg, int k, double gamma,
                   std::span<T> grad_pos, std::span<T> grad_neg);

// Reusable state for a training run: RNG streams, Adam moments, batch buffers.
// Shuffling and negative sampling draw from independent seeded generators.
template <typename T>
struct TrainerState {
    std::mt19937_64 shuffle_rng;
    std::mt19937_64 negative_rng;
    AdamState<T> adam;
    Gradients<T> grads;
    ModelWorkspace<T> ws;
    std::vector<int64_t> order;
    std::vector<Triple> batch_pos;
    std::vector<Triple> negatives;
    std::vector<EntityId> pos_h, neg_h;
    std::vector<RelationId> pos_r, neg_r;
    std::vector<EntityId> pos_t, neg_t;
    std::vector<T> s_pos, s_neg, g_pos, g_neg;

    TrainerState(const Model<T>& model, const TrainConfig& cfg);
};

// One pass over the training split: shuffle, corrupt, score, hinge, backward,
// Adam. Returns the mean pair loss over the epoch.
template <typename T>
double train_epoch(Model<T>& model, const EncodedSplit& train, const TrainConfig& cfg,
                   const FilterIndex* filter, TrainerState<T>& state);

struct TrainResult {
    Model<float> best_model;
    TrainLog log;
    double best_val_mrr = -1.0;
    int best_epoch = 0;
};

// Full loop of train_epoch with filtered validation MRR every `eval_every`
// epochs, best-checkpoint tracking, and early stop after `patience`
// consecutive non-improving evaluations.
TrainResult train(Model<float>& model, const Dataset& dataset, const TrainConfig& cfg,
                  int eval_threads = 1);

void write_train_log(const TrainLog& log, const std::string& path);

// Checkpoint: single-line JSON header {format_version, kind, entities,
// relations, dim, radius, delta, epsilon, scale} followed by row-major
// little-endian float32 payload, entity_latent then relation_vecs.
// Round trip is bit-exact.
void save_checkpoint(const Model<float>& model, const std::string& path);
Model<float> load_checkpoint(const std::string& path);

}  // namespace skge

#endif  // SKGE_TRAINER_HPP
