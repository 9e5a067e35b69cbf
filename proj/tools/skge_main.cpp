// Command-line front end: train / eval / grid / analyze / stats.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "skge/dataset.hpp"
#include "skge/evaluator.hpp"
#include "skge/model.hpp"
#include "skge/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve_data_dir(const std::string& arg) {
    if (arg.empty()) throw std::runtime_error("no dataset directory given (--data)");
    if (fs::is_directory(arg)) return arg;
    const char* root = std::getenv("SKGE_DATA_ROOT");
    if (root && *root) {
        const fs::path joined = fs::path(root) / arg;
        if (fs::is_directory(joined)) return joined.string();
        throw std::runtime_error("dataset directory not found: \"" + arg + "\" (also tried \"" +
                                 joined.string() + "\")");
    }
    throw std::runtime_error("dataset directory not found: \"" + arg + "\"");
}

void write_resolved_config(const CLI::App& root, const std::string& out_dir) {
    const fs::path path = fs::path(out_dir) / "config.resolved";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << root.config_to_str(true, false);
}

void echo_config_stderr(const CLI::App& root) {
    std::istringstream cfg(root.config_to_str(true, false));
    std::string line;
    while (std::getline(cfg, line)) std::cerr << "# " << line << '\n';
}

const skge::EncodedSplit& pick_split(const skge::Dataset& ds, const std::string& name) {
    if (name == "train") return ds.train;
    if (name == "valid") return ds.valid;
    if (name == "test") return ds.test;
    throw std::runtime_error("unknown split \"" + name + "\" (expected train|valid|test)");
}

void check_checkpoint_matches(const skge::Model<float>& model, const skge::Vocab& vocab) {
    if (model.num_entities() != vocab.num_entities()) {
        std::ostringstream msg;
        msg << "checkpoint/vocabulary mismatch: checkpoint has " << model.num_entities()
            << " entities, dataset has " << vocab.num_entities();
        throw std::runtime_error(msg.str());
    }
    if (model.num_relations() != vocab.num_relations()) {
        std::ostringstream msg;
        msg << "checkpoint/vocabulary mismatch: checkpoint has " << model.num_relations()
            << " relations, dataset has " << vocab.num_relations();
        throw std::runtime_error(msg.str());
    }
}

json category_map_json(const std::map<skge::RelationCategory, skge::CategoryMetrics>& by_cat) {
    json j = json::object();
    for (const auto& [cat, cm] : by_cat) {
        json entry;
        entry["n_queries"] = cm.n_queries;
        entry["metrics"] = cm.metrics ? json::parse(cm.metrics->to_json()) : json(nullptr);
        j[skge::category_name(cat)] = entry;
    }
    return j;
}

struct TrainOpts {
    std::string model = "skge";
    std::string data;
    std::string out = "run";
    int threads = 1;
    bool no_timing = false;
    bool no_transe_norm = false;
    skge::TrainConfig cfg;
};

void add_train_options(CLI::App* cmd, TrainOpts& o, bool with_margin_lr) {
    cmd->add_option("--model", o.model, "Model kind: transe|skge|skge-fixednorm|skge-learnable-scale")
        ->capture_default_str();
    cmd->add_option("--data", o.data, "Dataset directory with train.txt/valid.txt/test.txt")
        ->required();
    cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
    cmd->add_option("--dim", o.cfg.dim, "Latent dimension D")->capture_default_str();
    if (with_margin_lr) {
        cmd->add_option("--margin", o.cfg.margin, "Ranking margin gamma")->capture_default_str();
        cmd->add_option("--lr", o.cfg.lr, "Adam learning rate")->capture_default_str();
    }
    cmd->add_option("--batch-size", o.cfg.batch_size, "Positives per batch")->capture_default_str();
    cmd->add_option("--epochs", o.cfg.epochs, "Epoch limit")->capture_default_str();
    cmd->add_option("--negatives", o.cfg.negatives_per_positive, "Negatives per positive")
        ->capture_default_str();
    cmd->add_option("--eval-every", o.cfg.eval_every, "Validation period in epochs")
        ->capture_default_str();
    cmd->add_option("--patience", o.cfg.patience, "Non-improving evaluations before stopping")
        ->capture_default_str();
    cmd->add_option("--seed", o.cfg.seed, "RNG seed")->capture_default_str();
    cmd->add_option("--radius", o.cfg.radius, "Sphere radius R")->capture_default_str();
    cmd->add_option("--delta", o.cfg.delta, "Spherization angle margin")->capture_default_str();
    cmd->add_option("--epsilon", o.cfg.epsilon, "Projection stabilizer")->capture_default_str();
    cmd->add_flag("--no-transe-norm", o.no_transe_norm,
                  "Disable per-batch entity normalization for TransE");
    cmd->add_flag("--filtered-corruption", o.cfg.filtered_corruption,
                  "Resample corruptions that hit known-true triples");
    cmd->add_option("--threads", o.threads, "Worker threads for validation (1 = bit-exact)")
        ->capture_default_str();
    cmd->add_flag("--no-timing", o.no_timing, "Write seconds=0 in the log for bit-exact reruns");
}

skge::TrainConfig finalize_config(const TrainOpts& o) {
    skge::TrainConfig cfg = o.cfg;
    cfg.transe_normalize_entities = !o.no_transe_norm;
    cfg.record_timing = !o.no_timing;
    cfg.validate();
    return cfg;
}

int run_train_cell(const TrainOpts& o, const skge::TrainConfig& cfg, const skge::Dataset& ds,
                   skge::TrainResult& result) {
    skge::Model<float> model = skge::init_model<float>(
        skge::kind_from_name(o.model), ds.vocab.num_entities(), ds.vocab.num_relations(),
        cfg.dim, cfg.sphere_params<float>(), cfg.seed);
    result = skge::train(model, ds, cfg, o.threads);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-graph embeddings on the sphere: training, evaluation, analysis"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a config file");

    // ---- train ----------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "Train one model");
    auto train_opts = std::make_shared<TrainOpts>();
    add_train_options(train_cmd, *train_opts, true);
    train_cmd->callback([&app, train_opts] {
        const skge::TrainConfig cfg = finalize_config(*train_opts);
        const skge::Dataset ds = skge::load_dataset_dir(resolve_data_dir(train_opts->data));
        fs::create_directories(train_opts->out);
        write_resolved_config(app, train_opts->out);

        skge::TrainResult res;
        run_train_cell(*train_opts, cfg, ds, res);
        skge::save_checkpoint(res.best_model, train_opts->out + "/model.ckpt");
        skge::write_train_log(res.log, train_opts->out + "/train.log.jsonl");
        std::cout << "model=" << train_opts->model << " epochs_run=" << res.log.size()
                  << " best_val_mrr=" << res.best_val_mrr << " best_epoch=" << res.best_epoch
                  << " out=" << train_opts->out << '\n';
    });

    // ---- grid -----------------------------------------------------------
    auto* grid_cmd = app.add_subcommand("grid", "Sweep margin x learning rate, pick by val MRR");
    auto grid_opts = std::make_shared<TrainOpts>();
    auto margins = std::make_shared<std::vector<double>>(std::vector<double>{3, 6, 9, 12});
    auto lrs = std::make_shared<std::vector<double>>(std::vector<double>{1e-3, 5e-4, 1e-4, 5e-5});
    add_train_options(grid_cmd, *grid_opts, false);
    grid_cmd->add_option("--margins", *margins, "Margin grid")
        ->delimiter(',')
        ->capture_default_str();
    grid_cmd->add_option("--lrs", *lrs, "Learning-rate grid")->delimiter(',')->capture_default_str();
    grid_cmd->callback([&app, grid_opts, margins, lrs] {
        const skge::Dataset ds = skge::load_dataset_dir(resolve_data_dir(grid_opts->data));
        fs::create_directories(grid_opts->out);
        write_resolved_config(app, grid_opts->out);

        std::ofstream csv(grid_opts->out + "/grid.csv");
        if (!csv) throw std::runtime_error("cannot write " + grid_opts->out + "/grid.csv");
        csv << "margin,lr,best_val_mrr,best_epoch,epochs_run\n";
        double best_mrr = -1.0;
        double best_margin = 0.0, best_lr = 0.0;
        for (double margin : *margins) {
            for (double lr : *lrs) {
                TrainOpts cell = *grid_opts;
                cell.cfg.margin = margin;
                cell.cfg.lr = lr;
                const skge::TrainConfig cfg = finalize_config(cell);
                skge::TrainResult res;
                run_train_cell(cell, cfg, ds, res);
                csv << margin << ',' << lr << ',' << res.best_val_mrr << ',' << res.best_epoch
                    << ',' << res.log.size() << '\n';
                csv.flush();
                std::cout << "cell margin=" << margin << " lr=" << lr
                          << " best_val_mrr=" << res.best_val_mrr << '\n';
                if (res.best_val_mrr > best_mrr) {
                    best_mrr = res.best_val_mrr;
                    best_margin = margin;
                    best_lr = lr;
                }
            }
        }
        json best{{"margin", best_margin}, {"lr", best_lr}, {"best_val_mrr", best_mrr}};
        std::ofstream bj(grid_opts->out + "/best.json");
        bj << best.dump() << '\n';
        std::cout << "best margin=" << best_margin << " lr=" << best_lr
                  << " val_mrr=" << best_mrr << '\n';
    });

    // ---- eval -----------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "Filtered link-prediction evaluation");
    auto eval_ckpt = std::make_shared<std::string>();
    auto eval_data = std::make_shared<std::string>();
    auto eval_split = std::make_shared<std::string>("test");
    auto eval_out = std::make_shared<std::string>("eval");
    auto eval_threads = std::make_shared<int>(1);
    auto by_type = std::make_shared<bool>(false);
    eval_cmd->add_option("--checkpoint", *eval_ckpt, "Model checkpoint")->required();
    eval_cmd->add_option("--data", *eval_data, "Dataset directory")->required();
    eval_cmd->add_option("--split", *eval_split, "Split to evaluate: train|valid|test")
        ->capture_default_str();
    eval_cmd->add_option("--out", *eval_out, "Output directory")->capture_default_str();
    eval_cmd->add_flag("--by-relation-type", *by_type, "Also break metrics down by relation category");
    eval_cmd->add_option("--threads", *eval_threads, "Worker threads (1 = bit-exact)")
        ->capture_default_str();
    eval_cmd->callback([&app, eval_ckpt, eval_data, eval_split, eval_out, eval_threads, by_type] {
        const skge::Dataset ds = skge::load_dataset_dir(resolve_data_dir(*eval_data));
        const skge::Model<float> model = skge::load_checkpoint(*eval_ckpt);
        check_checkpoint_matches(model, ds.vocab);
        const skge::EncodedSplit& split = pick_split(ds, *eval_split);

        const skge::EvalResult ev = skge::evaluate(model, split, ds.filter, *eval_threads);
        fs::create_directories(*eval_out);
        write_resolved_config(app, *eval_out);
        {
            std::ofstream mj(*eval_out + "/metrics.json");
            mj << ev.overall.to_json() << '\n';
            json dir_json{{"head", json::parse(ev.head_direction.to_json())},
                          {"tail", json::parse(ev.tail_direction.to_json())}};
            std::ofstream dj(*eval_out + "/metrics_by_direction.json");
            dj << dir_json.dump() << '\n';
        }
        skge::write_ranks_csv(ev.ranks, *eval_out + "/ranks.csv");
        if (*by_type) {
            const auto categories = skge::categorize_relations(ds.train);
            const auto by_cat = skge::metrics_by_category(ev, split, categories);
            std::ofstream cj(*eval_out + "/metrics_by_category.json");
            cj << category_map_json(by_cat).dump() << '\n';
        }
        std::cout << ev.overall.to_json() << '\n';
    });

    // ---- analyze --------------------------------------------------------
    auto* analyze_cmd = app.add_subcommand("analyze", "Embedding-space analyses");
    analyze_cmd->require_subcommand(1);

    auto* neg_cmd = analyze_cmd->add_subcommand("negatives", "Negative-score distribution");
    auto neg_ckpt = std::make_shared<std::string>();
    auto neg_data = std::make_shared<std::string>();
    auto neg_out = std::make_shared<std::string>("negatives");
    auto neg_q = std::make_shared<int64_t>(1000);
    auto neg_k = std::make_shared<int64_t>(1024);
    auto neg_seed = std::make_shared<uint64_t>(1);
    auto neg_bins = std::make_shared<int>(100);
    neg_cmd->add_option("--checkpoint", *neg_ckpt, "Model checkpoint")->required();
    neg_cmd->add_option("--data", *neg_data, "Dataset directory")->required();
    neg_cmd->add_option("--out", *neg_out, "Output directory")->capture_default_str();
    neg_cmd->add_option("--q", *neg_q, "Test queries to sample")->capture_default_str();
    neg_cmd->add_option("--k-neg", *neg_k, "Uniform negative tails per query")->capture_default_str();
    neg_cmd->add_option("--seed", *neg_seed, "Sampling seed")->capture_default_str();
    neg_cmd->add_option("--bins", *neg_bins, "Histogram bins")->capture_default_str();
    neg_cmd->callback([&app, neg_ckpt, neg_data, neg_out, neg_q, neg_k, neg_seed, neg_bins] {
        const skge::Dataset ds = skge::load_dataset_dir(resolve_data_dir(*neg_data));
        const skge::Model<float> model = skge::load_checkpoint(*neg_ckpt);
        check_checkpoint_matches(model, ds.vocab);
        const skge::NegDistReport rep = skge::negative_score_distribution(
            model, ds.test, *neg_q, *neg_k, *neg_seed, *neg_bins);
        fs::create_directories(*neg_out);
        write_resolved_config(app, *neg_out);
        {
            std::ofstream hist(*neg_out + "/negatives.csv");
            hist << rep.histogram_csv();
            std::ofstream mom(*neg_out + "/negatives.json");
            mom << rep.moments_json() << '\n';
        }
        std::cout << rep.moments_json() << '\n';
    });

    auto* knn_cmd = analyze_cmd->add_subcommand("knn", "Nearest entities to an anchor");
    auto knn_ckpt = std::make_shared<std::string>();
    auto knn_data = std::make_shared<std::string>();
    auto knn_entity = std::make_shared<std::string>();
    auto knn_k = std::make_shared<int>(5);
    knn_cmd->add_option("--checkpoint", *knn_ckpt, "Model checkpoint")->required();
    knn_cmd->add_option("--data", *knn_data, "Dataset directory")->required();
    knn_cmd->add_option("--entity", *knn_entity, "Anchor entity label")->required();
    knn_cmd->add_option("--k", *knn_k, "Neighbor count")->capture_default_str();
    knn_cmd->callback([&app, knn_ckpt, knn_data, knn_entity, knn_k] {
        const skge::Dataset ds = skge::load_dataset_dir(resolve_data_dir(*knn_data));
        const skge::Model<float> model = skge::load_checkpoint(*knn_ckpt);
        check_checkpoint_matches(model, ds.vocab);
        echo_config_stderr(app);
        for (const auto& [label, dist] : skge::knn(model, ds.vocab, *knn_entity, *knn_k)) {
            std::cout << label << '\t' << dist << '\n';
        }
    });

    auto* sig_cmd = analyze_cmd->add_subcommand("significance", "Paired t-test on two rank files");
    auto ranks_a = std::make_shared<std::string>();
    auto ranks_b = std::make_shared<std::string>();
    sig_cmd->add_option("--ranks-a", *ranks_a, "First ranks.csv")->required();
    sig_cmd->add_option("--ranks-b", *ranks_b, "Second ranks.csv")->required();
    sig_cmd->callback([&app, ranks_a, ranks_b] {
        const auto a = skge::read_ranks_csv(*ranks_a);
        const auto b = skge::read_ranks_csv(*ranks_b);
        if (a.size() != b.size())
            throw std::runtime_error("rank files are not paired: different query counts");
        std::vector<double> rr_a(a.size()), rr_b(b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            if (a[i].triple_index != b[i].triple_index || a[i].direction != b[i].direction)
                throw std::runtime_error(
                    "rank files are not paired: query sequences differ at row " +
                    std::to_string(i + 2));
            rr_a[i] = a[i].reciprocal_rank;
            rr_b[i] = b[i].reciprocal_rank;
        }
        echo_config_stderr(app);
        const skge::TTestResult res = skge::paired_ttest(rr_a, rr_b);
        std::cout << "t=" << res.t << " p=" << res.p << " n=" << a.size()
                  << " degenerate=" << (res.degenerate ? "true" : "false") << '\n';
    });

    // ---- stats ----------------------------------------------------------
    auto* stats_cmd = app.add_subcommand("stats", "Dataset summary");
    auto stats_data = std::make_shared<std::string>();
    auto stats_json = std::make_shared<bool>(false);
    stats_cmd->add_option("--data", *stats_data, "Dataset directory")->required();
    stats_cmd->add_flag("--json", *stats_json, "Emit JSON instead of a table");
    stats_cmd->callback([&app, stats_data, stats_json] {
        const skge::Dataset ds = skge::load_dataset_dir(resolve_data_dir(*stats_data));
        echo_config_stderr(app);
        const skge::StatsReport rep = ds.stats();
        if (*stats_json) std::cout << rep.to_json() << '\n';
        else std::cout << rep.to_table();
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
