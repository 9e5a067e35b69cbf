// Python bindings for the SKGE core: dataset handling, sphere geometry,
// model scoring, training, and evaluation. Mirrors the CLI's operation set.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skge/dataset.hpp"
#include "skge/evaluator.hpp"
#include "skge/model.hpp"
#include "skge/sphere.hpp"
#include "skge/trainer.hpp"

namespace py = pybind11;
using namespace skge;

namespace {

py::dict metrics_dict(const Metrics& m) {
    py::dict d;
    d["mrr"] = m.mrr;
    d["hits1"] = m.hits1;
    d["hits3"] = m.hits3;
    d["hits10"] = m.hits10;
    d["n_queries"] = m.n_queries;
    return d;
}

py::list ranks_list(const std::vector<RankResult>& ranks) {
    py::list out;
    for (const RankResult& r : ranks) {
        py::dict row;
        row["triple_index"] = r.triple_index;
        row["direction"] = direction_name(r.direction);
        row["rank"] = r.rank;
        row["reciprocal_rank"] = r.reciprocal_rank;
        out.append(row);
    }
    return out;
}

const EncodedSplit& pick_split(const Dataset& d, const std::string& name) {
    if (name == "train") return d.train;
    if (name == "valid") return d.valid;
    if (name == "test") return d.test;
    throw std::invalid_argument("split must be one of train/valid/test, got '" + name + "'");
}

py::dict category_map_dict(const std::map<RelationCategory, CategoryMetrics>& by_cat) {
    py::dict out;
    for (const auto& [cat, cm] : by_cat) {
        py::dict entry;
        entry["n_queries"] = cm.n_queries;
        entry["metrics"] = cm.metrics ? py::object(metrics_dict(*cm.metrics)) : py::none();
        out[category_name(cat)] = entry;
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spherical knowledge-graph embedding core (C++ backend)";

    // ------------------------------------------------------------- datasets
    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("num_entities",
                               [](const Dataset& d) { return d.vocab.num_entities(); })
        .def_property_readonly("num_relations",
                               [](const Dataset& d) { return d.vocab.num_relations(); })
        .def_property_readonly("n_train", [](const Dataset& d) { return d.train.size(); })
        .def_property_readonly("n_valid", [](const Dataset& d) { return d.valid.size(); })
        .def_property_readonly("n_test", [](const Dataset& d) { return d.test.size(); })
        .def("entity_id", [](const Dataset& d, const std::string& s) { return d.vocab.entity_id(s); })
        .def("relation_id",
             [](const Dataset& d, const std::string& s) { return d.vocab.relation_id(s); })
        .def("entity_label",
             [](const Dataset& d, EntityId e) { return d.vocab.entity_label(e); })
        .def("relation_label",
             [](const Dataset& d, RelationId r) { return d.vocab.relation_label(r); })
        .def("triples",
             [](const Dataset& d, const std::string& split) {
                 std::vector<std::tuple<EntityId, RelationId, EntityId>> out;
                 for (const Triple& t : pick_split(d, split).triples) out.emplace_back(t.h, t.r, t.t);
                 return out;
             },
             py::arg("split") = "train")
        .def("stats_json", [](const Dataset& d) { return d.stats().to_json(); })
        .def("stats_table", [](const Dataset& d) { return d.stats().to_table(); })
        .def("relation_categories",
             [](const Dataset& d) {
                 py::dict out;
                 for (const auto& [rel, cat] : categorize_relations(d.train)) {
                     out[d.vocab.relation_label(rel).c_str()] = category_name(cat);
                 }
                 return out;
             })
        .def("__repr__", [](const Dataset& d) {
            const StatsReport s = d.stats();
            return "Dataset(entities=" + std::to_string(s.entities) +
                   ", relations=" + std::to_string(s.relations) +
                   ", train=" + std::to_string(s.train) + ", valid=" + std::to_string(s.valid) +
                   ", test=" + std::to_string(s.test) + ")";
        });

    m.def("load_dataset", &load_dataset, py::arg("train_path"), py::arg("valid_path"),
          py::arg("test_path"), "Load three TSV triple files into an encoded dataset");
    m.def("load_dataset_dir", &load_dataset_dir, py::arg("dir"),
          "Load <dir>/train.txt, <dir>/valid.txt, <dir>/test.txt");

    // ------------------------------------------------------------- geometry
    m.def(
        "spherize",
        [](std::vector<double> v, double radius, double scale, double delta) {
            SpherizationParams<double> p{radius, scale, delta, 1e-9};
            p.validate();
            std::vector<double> out(v.size() + 1);
            spherize_forward<double>(v, p, out);
            return out;
        },
        py::arg("v"), py::arg("radius") = 1.0, py::arg("scale") = 1.0, py::arg("delta") = 1e-4,
        "Map a latent vector in R^D onto the positive orthant of the radius-R sphere in R^(D+1)");
    m.def(
        "project_to_sphere",
        [](std::vector<double> pvec, double radius, double eps) {
            std::vector<double> out(pvec.size());
            project_to_sphere<double>(pvec, radius, eps, out);
            return out;
        },
        py::arg("p"), py::arg("radius") = 1.0, py::arg("eps") = 1e-9,
        "Rescale an ambient point back onto the radius-R sphere: R*p/(||p||+eps)");
    m.def(
        "chord_distance",
        [](std::vector<double> a, std::vector<double> b) {
            return chord_distance<double>(a, b);
        },
        py::arg("a"), py::arg("b"), "Euclidean distance between two ambient points");

    // --------------------------------------------------------------- models
    py::class_<Model<float>>(m, "Model")
        .def_property_readonly("kind", [](const Model<float>& m_) { return kind_name(m_.kind); })
        .def_readonly("dim", &Model<float>::dim)
        .def_property_readonly("num_entities", &Model<float>::num_entities)
        .def_property_readonly("num_relations", &Model<float>::num_relations)
        .def_property_readonly("radius",
                               [](const Model<float>& m_) { return double(m_.spherization.radius); })
        .def_property_readonly("scale",
                               [](const Model<float>& m_) { return double(m_.spherization.scale); })
        .def("entity_embedding",
             [](const Model<float>& m_, EntityId e) {
                 if (e < 0 || e >= m_.num_entities()) throw std::out_of_range("entity id out of range");
                 auto row = m_.entity_latent.row(e);
                 return std::vector<float>(row.begin(), row.end());
             },
             py::arg("entity"), "Raw latent row for one entity")
        .def("entity_point",
             [](const Model<float>& m_, EntityId e) {
                 if (e < 0 || e >= m_.num_entities()) throw std::out_of_range("entity id out of range");
                 const int width = m_.kind == ModelKind::TransE ? m_.dim : m_.dim + 1;
                 std::vector<float> out(static_cast<size_t>(width), 0.0f);
                 entity_point<float>(m_, e, out);
                 return out;
             },
             py::arg("entity"), "Representation the distance acts on (on-sphere for spherical kinds)")
        .def("relation_vector",
             [](const Model<float>& m_, RelationId r) {
                 if (r < 0 || r >= m_.num_relations()) throw std::out_of_range("relation id out of range");
                 auto row = m_.relation_vecs.row(r);
                 return std::vector<float>(row.begin(), row.end());
             },
             py::arg("relation"))
        .def("score",
             [](const Model<float>& m_, EntityId h, RelationId r, EntityId t) {
                 const EntityId hs[1] = {h};
                 const RelationId rs[1] = {r};
                 const EntityId ts[1] = {t};
                 float out[1];
                 ModelWorkspace<float> ws;
                 score_batch<float>(m_, hs, rs, ts, out, ws);
                 return double(out[0]);
             },
             py::arg("h"), py::arg("r"), py::arg("t"), "Distance-based score of one triple (lower is better)")
        .def("score_all_tails",
             [](const Model<float>& m_, EntityId h, RelationId r) {
                 return score_all_tails<float>(m_, h, r);
             },
             py::arg("h"), py::arg("r"))
        .def("score_all_heads",
             [](const Model<float>& m_, RelationId r, EntityId t) {
                 return score_all_heads<float>(m_, r, t);
             },
             py::arg("r"), py::arg("t"))
        .def("__repr__", [](const Model<float>& m_) {
            return std::string("Model(kind=") + kind_name(m_.kind) + ", dim=" + std::to_string(m_.dim) +
                   ", entities=" + std::to_string(m_.num_entities()) +
                   ", relations=" + std::to_string(m_.num_relations()) + ")";
        });

    m.def(
        "init_model",
        [](const std::string& kind, int64_t num_entities, int64_t num_relations, int dim,
           uint64_t seed, double radius, double delta, double epsilon) {
            SpherizationParams<float> p{float(radius), 1.0f, float(delta), float(epsilon)};
            return init_model<float>(kind_from_name(kind), num_entities, num_relations, dim, p, seed);
        },
        py::arg("kind"), py::arg("num_entities"), py::arg("num_relations"), py::arg("dim"),
        py::arg("seed") = 1, py::arg("radius") = 1.0, py::arg("delta") = 1e-4,
        py::arg("epsilon") = 1e-9,
        "Fresh model with uniform init; kind is one of transe/skge/skge-fixednorm/skge-learnable-scale");
    m.def("save_checkpoint", &save_checkpoint, py::arg("model"), py::arg("path"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    // ------------------------------------------------------------- training
    m.def(
        "train",
        [](Model<float>& model, const Dataset& dataset, double margin, double lr, int batch_size,
           int epochs, int negatives_per_positive, int eval_every, int patience, uint64_t seed,
           bool transe_normalize_entities, bool filtered_corruption, bool record_timing,
           int eval_threads) {
            TrainConfig cfg;
            cfg.dim = model.dim;
            cfg.margin = margin;
            cfg.lr = lr;
            cfg.batch_size = batch_size;
            cfg.epochs = epochs;
            cfg.negatives_per_positive = negatives_per_positive;
            cfg.eval_every = eval_every;
            cfg.patience = patience;
            cfg.seed = seed;
            cfg.transe_normalize_entities = transe_normalize_entities;
            cfg.filtered_corruption = filtered_corruption;
            cfg.record_timing = record_timing;
            cfg.radius = double(model.spherization.radius);
            cfg.delta = double(model.spherization.angle_margin);
            cfg.epsilon = double(model.spherization.epsilon);
            TrainResult res;
            {
                py::gil_scoped_release release;
                res = train(model, dataset, cfg, eval_threads);
            }
            py::dict out;
            out["best_val_mrr"] = res.best_val_mrr;
            out["best_epoch"] = res.best_epoch;
            out["epochs_run"] = res.log.size();
            out["model"] = res.best_model;
            py::list log;
            for (const EpochRecord& rec : res.log) {
                py::dict row;
                row["epoch"] = rec.epoch;
                row["mean_loss"] = rec.mean_loss;
                row["val_mrr"] = rec.val_mrr ? py::object(py::float_(*rec.val_mrr)) : py::none();
                row["seconds"] = rec.seconds;
                log.append(row);
            }
            out["log"] = log;
            return out;
        },
        py::arg("model"), py::arg("dataset"), py::arg("margin") = 6.0, py::arg("lr") = 5e-4,
        py::arg("batch_size") = 1024, py::arg("epochs") = 1000,
        py::arg("negatives_per_positive") = 1, py::arg("eval_every") = 50, py::arg("patience") = 5,
        py::arg("seed") = 1, py::arg("transe_normalize_entities") = true,
        py::arg("filtered_corruption") = false, py::arg("record_timing") = true,
        py::arg("eval_threads") = 1,
        "Margin-ranking training with periodic filtered validation; returns the best model and log");

    // ----------------------------------------------------------- evaluation
    m.def(
        "evaluate",
        [](const Model<float>& model, const Dataset& dataset, const std::string& split,
           int threads) {
            const EncodedSplit& s = pick_split(dataset, split);
            EvalResult res;
            {
                py::gil_scoped_release release;
                res = evaluate(model, s, dataset.filter, threads);
            }
            py::dict out;
            out["overall"] = metrics_dict(res.overall);
            out["head"] = metrics_dict(res.head_direction);
            out["tail"] = metrics_dict(res.tail_direction);
            out["ranks"] = ranks_list(res.ranks);
            return out;
        },
        py::arg("model"), py::arg("dataset"), py::arg("split") = "test", py::arg("threads") = 1,
        "Filtered link-prediction metrics over both query directions");
    m.def(
        "evaluate_by_category",
        [](const Model<float>& model, const Dataset& dataset, const std::string& split,
           int threads) {
            const EncodedSplit& s = pick_split(dataset, split);
            const auto cats = categorize_relations(dataset.train);
            std::map<RelationCategory, CategoryMetrics> by_cat;
            {
                py::gil_scoped_release release;
                by_cat = evaluate_by_category(model, s, dataset.filter, cats, threads);
            }
            return category_map_dict(by_cat);
        },
        py::arg("model"), py::arg("dataset"), py::arg("split") = "test", py::arg("threads") = 1,
        "Metrics bucketed by the relation's cardinality category (1-to-1/1-to-N/N-to-1/N-to-N)");
    m.def(
        "paired_ttest",
        [](std::vector<double> a, std::vector<double> b) {
            const TTestResult r = paired_ttest(a, b);
            py::dict out;
            out["t"] = r.t;
            out["p"] = r.p;
            out["degenerate"] = r.degenerate;
            return out;
        },
        py::arg("rr_a"), py::arg("rr_b"),
        "Two-sided paired t-test on per-query reciprocal ranks");
    m.def(
        "negative_score_distribution",
        [](const Model<float>& model, const Dataset& dataset, int64_t q, int64_t k, uint64_t seed,
           int bins) {
            NegDistReport rep;
            {
                py::gil_scoped_release release;
                rep = negative_score_distribution(model, dataset.test, q, k, seed, bins);
            }
            py::dict out;
            out["n"] = rep.n;
            out["mean"] = rep.mean;
            out["variance"] = rep.variance;
            out["kind"] = kind_name(rep.kind);
            out["bin_edges"] = rep.bin_edges;
            out["counts"] = rep.counts;
            return out;
        },
        py::arg("model"), py::arg("dataset"), py::arg("q") = 1000, py::arg("k") = 1024,
        py::arg("seed") = 1, py::arg("bins") = 100,
        "Score distribution of uniformly corrupted tails over sampled test queries");
    m.def(
        "knn",
        [](const Model<float>& model, const Dataset& dataset, const std::string& entity, int k) {
            return knn(model, dataset.vocab, entity, k);
        },
        py::arg("model"), py::arg("dataset"), py::arg("entity"), py::arg("k") = 10,
        "k nearest entities in representation space, ascending distance");
}
