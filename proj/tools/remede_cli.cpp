// remede CLI: generate / train / search / evaluate / export.
//
// Every successful run writes a run.json next to its artifacts capturing the
// resolved config, the seed, and a content hash per artifact. Outputs are
// deterministic for a fixed config/seed, so reruns overwrite with identical
// bytes. Inputs are validated before anything is written.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "remede/prune.hpp"
#include "remede/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace remede;

namespace {

struct ExperimentConfig {
    TaskId task = TaskId::PoC1;
    GenConfig gen;
    TrainConfig train;
    TrialsConfig trials;
};

json to_json(const ExperimentConfig& c) {
    return json{
        {"task", task_name(c.task)},
        {"gen",
         {{"v", c.gen.v},
          {"d", c.gen.d},
          {"d_min", c.gen.d_min},
          {"d_max", c.gen.d_max},
          {"noise_mean", c.gen.noise_mean},
          {"noise_std", c.gen.noise_std},
          {"n_sequences", c.gen.n_sequences},
          {"block_len", c.gen.block_len},
          {"n_blocks", c.gen.n_blocks},
          {"seed", c.gen.seed},
          {"noise", c.gen.noise}}},
        {"train",
         {{"depth", c.train.depth},
          {"n_m", c.train.n_m},
          {"learning_rate", c.train.learning_rate},
          {"batch_size", c.train.batch_size},
          {"max_epochs", c.train.max_epochs},
          {"patience", c.train.patience},
          {"seed", c.train.seed},
          {"clip_norm", c.train.clip_norm},
          {"plateau_decays", c.train.plateau_decays},
          {"search_trials", c.train.search_trials},
          {"lr_min", c.train.lr_min},
          {"lr_max", c.train.lr_max},
          {"search_epochs", c.train.search_epochs},
          {"search_patience", c.train.search_patience},
          {"search_max_sequences", c.train.search_max_sequences}}},
        {"trials",
         {{"n_trials", c.trials.n_trials},
          {"n_seeds", c.trials.n_seeds},
          {"train_fraction", c.trials.train_fraction},
          {"valid_fraction", c.trials.valid_fraction},
          {"parallel", c.trials.parallel}}}};
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
    if (j.contains("gen")) {
        const json& g = j.at("gen");
        g.at("v").get_to(c.gen.v);
        g.at("d").get_to(c.gen.d);
        g.at("d_min").get_to(c.gen.d_min);
        g.at("d_max").get_to(c.gen.d_max);
        g.at("noise_mean").get_to(c.gen.noise_mean);
        g.at("noise_std").get_to(c.gen.noise_std);
        g.at("n_sequences").get_to(c.gen.n_sequences);
        g.at("block_len").get_to(c.gen.block_len);
        g.at("n_blocks").get_to(c.gen.n_blocks);
        g.at("seed").get_to(c.gen.seed);
        g.at("noise").get_to(c.gen.noise);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        t.at("depth").get_to(c.train.depth);
        t.at("n_m").get_to(c.train.n_m);
        t.at("learning_rate").get_to(c.train.learning_rate);
        t.at("batch_size").get_to(c.train.batch_size);
        t.at("max_epochs").get_to(c.train.max_epochs);
        t.at("patience").get_to(c.train.patience);
        t.at("seed").get_to(c.train.seed);
        t.at("clip_norm").get_to(c.train.clip_norm);
        if (t.contains("plateau_decays")) t.at("plateau_decays").get_to(c.train.plateau_decays);
        t.at("search_trials").get_to(c.train.search_trials);
        t.at("lr_min").get_to(c.train.lr_min);
        t.at("lr_max").get_to(c.train.lr_max);
        t.at("search_epochs").get_to(c.train.search_epochs);
        t.at("search_patience").get_to(c.train.search_patience);
        t.at("search_max_sequences").get_to(c.train.search_max_sequences);
    }
    if (j.contains("trials")) {
        const json& t = j.at("trials");
        t.at("n_trials").get_to(c.trials.n_trials);
        t.at("n_seeds").get_to(c.trials.n_seeds);
        t.at("train_fraction").get_to(c.trials.train_fraction);
        t.at("valid_fraction").get_to(c.trials.valid_fraction);
        t.at("parallel").get_to(c.trials.parallel);
    }
    return c;
}

std::uint64_t fnv1a64_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    return h;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_run_json(const fs::path& out_dir, const std::string& command,
                    const ExperimentConfig& cfg, const std::vector<fs::path>& artifacts) {
    json arts = json::array();
    for (const fs::path& p : artifacts) {
        std::ostringstream hex;
        hex << std::hex << fnv1a64_file(p);
        arts.push_back({{"path", p.filename().string()}, {"fnv1a64", hex.str()}});
    }
    json run{{"command", command},
             {"seed", cfg.gen.seed},
             {"config", to_json(cfg)},
             {"artifacts", arts}};
    write_text(out_dir / "run.json", run.dump(2) + "\n");
}

std::vector<SequenceExample> load_dataset(const std::string& path) {
    if (!fs::exists(path)) throw std::runtime_error("dataset not found: " + path);
    return read_jsonl(path);
}

Checkpoint load_checkpoint_checked(const std::string& path) {
    if (!fs::exists(path)) throw std::runtime_error("checkpoint not found: " + path);
    return load_checkpoint(path);
}

// Split exactly as run_trials does, so single-command runs line up with the
// multi-trial protocol.
struct Splits {
    std::vector<SequenceExample> train, valid, test;
};

Splits make_splits(const std::vector<SequenceExample>& data, const ExperimentConfig& cfg) {
    auto [train_all, test] =
        split_dataset(data, cfg.trials.train_fraction, derive_seed(cfg.train.seed, 0x51));
    auto [train, valid] =
        split_dataset(train_all, 1.0 - cfg.trials.valid_fraction / cfg.trials.train_fraction,
                      derive_seed(cfg.train.seed, 0x52));
    return {std::move(train), std::move(valid), std::move(test)};
}

int cmd_generate(const ExperimentConfig& cfg, const fs::path& out_dir) {
    auto data = generate_dataset(cfg.task, cfg.gen);
    fs::create_directories(out_dir);
    fs::path ds = out_dir / (std::string(task_name(cfg.task)) + ".jsonl");
    write_jsonl(ds.string(), data);
    write_run_json(out_dir, "generate", cfg, {ds});
    std::cout << ds.string() << ": " << data.size() << " sequences\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& data_path,
              const fs::path& out_dir) {
    auto data = load_dataset(data_path);
    fs::create_directories(out_dir);
    std::vector<fs::path> artifacts;

    if (cfg.trials.n_seeds > 1) {
        std::vector<TrialOutcome> outcomes;
        TrialReport report = run_trials(cfg.task, data, cfg.train, cfg.trials, &outcomes);
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            fs::path ck = out_dir / ("checkpoint_" + std::to_string(i) + ".json");
            save_checkpoint(ck.string(),
                            {outcomes[i].cell, outcomes[i].seed, task_name(cfg.task)});
            artifacts.push_back(ck);
        }
        fs::path csv = out_dir / "report.csv";
        write_text(csv, report_csv(report));
        artifacts.push_back(csv);
        write_run_json(out_dir, "train", cfg, artifacts);
        std::cout << report_table(report);
        return 0;
    }

    Splits s = make_splits(data, cfg);
    RemedeCell cell = init_cell(cfg.train.depth, task_input_dim(cfg.task), cfg.train.n_m,
                                cfg.train.n_classes, s.train, cfg.train.seed);
    FitResult r = fit(cell, s.train, s.valid, cfg.train);
    fs::path ck = out_dir / "checkpoint.json";
    save_checkpoint(ck.string(), {cell, cfg.train.seed, task_name(cfg.task)});
    fs::path hist = out_dir / "history.csv";
    write_text(hist, history_csv(r));
    write_run_json(out_dir, "train", cfg, {ck, hist});
    std::cout << "best val accuracy " << r.best_val_accuracy << " (epoch " << r.best_epoch
              << "), test accuracy " << evaluate_model(cell, s.test) << "\n";
    return 0;
}

int cmd_search(ExperimentConfig cfg, const std::string& data_path, const fs::path& out_dir) {
    auto data = load_dataset(data_path);
    Splits s = make_splits(data, cfg);
    LrSearchResult r = lr_search(s.train, s.valid, cfg.train);
    fs::create_directories(out_dir);
    fs::path csv = out_dir / "search.csv";
    write_text(csv, trials_csv(r));
    cfg.train.learning_rate = r.best_lr;
    fs::path best = out_dir / "best_config.json";
    write_text(best, to_json(cfg).dump(2) + "\n");
    write_run_json(out_dir, "search", cfg, {csv, best});
    std::cout << "best lr " << r.best_lr << " (val accuracy " << r.best_accuracy << ")\n";
    return 0;
}

int cmd_evaluate(ExperimentConfig cfg, const std::string& ck_path,
                 const std::string& data_path, const fs::path& out_dir) {
    Checkpoint ck = load_checkpoint_checked(ck_path);
    auto data = load_dataset(data_path);
    if (!ck.task_id.empty()) cfg.task = parse_task(ck.task_id);

    auto [train, test] =
        split_dataset(data, cfg.trials.train_fraction, derive_seed(cfg.train.seed, 0xbb));
    TrialReport report;
    report.task = task_name(cfg.task);
    report.accuracies.push_back(evaluate_model(ck.cell, test));
    report.tree_sizes.push_back(tree_size(prune(ck.cell, train)));
    report.naive = naive_baseline(train, test);
    report.random_guess = random_guess_baseline(test, derive_seed(cfg.train.seed, 0xcc));
    finalize_report(report);

    fs::create_directories(out_dir);
    fs::path csv = out_dir / "report.csv";
    write_text(csv, report_csv(report));
    fs::path table = out_dir / "report.txt";
    write_text(table, report_table(report));
    write_run_json(out_dir, "evaluate", cfg, {csv, table});
    std::cout << report_table(report);
    return 0;
}

int cmd_export(const ExperimentConfig& cfg, const std::string& ck_path,
               const std::string& data_path, const std::string& format,
               const fs::path& out_dir) {
    Checkpoint ck = load_checkpoint_checked(ck_path);
    auto data = load_dataset(data_path);
    PrunedTree tree = prune(ck.cell, data);
    std::string text = export_graph(tree, format);  // rejects unknown formats
    fs::create_directories(out_dir);
    fs::path outfile = out_dir / ("tree." + format);
    write_text(outfile, text);
    write_run_json(out_dir, "export", cfg, {outfile});
    std::cout << outfile.string() << ": " << tree_size(tree) << " nodes\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recurrent hard decision trees with learnable memory"};
    app.require_subcommand(1);

    std::string config_path, data_path, ck_path, out_dir = "out", format = "dot";
    std::string task_str;
    std::uint64_t seed = 0;
    int depth = 0, n_m = 0, trials = 0, parallel = 0;
    double lr = 0.0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON experiment config")
            ->check(CLI::ExistingFile);
        sub->add_option("--task", task_str, "poc1..poc5");
        sub->add_option("--seed", seed, "master seed (data, init, shuffling, trials)");
        sub->add_option("--depth", depth, "tree depth");
        sub->add_option("--memory-dim", n_m, "memory dimensions");
        sub->add_option("--lr", lr, "learning rate");
        sub->add_option("--trials", trials, "trials kept in the multi-seed protocol");
        sub->add_option("--parallel-trials", parallel, "concurrent trials");
        sub->add_option("--out", out_dir, "output directory");
    };

    CLI::App* gen = app.add_subcommand("generate", "write a task dataset as JSONL");
    add_common(gen);

    CLI::App* train = app.add_subcommand("train", "train; with --trials > 1 runs the multi-seed protocol");
    add_common(train);
    train->add_option("--data", data_path, "dataset JSONL")->required();

    CLI::App* search = app.add_subcommand("search", "random learning-rate search");
    add_common(search);
    search->add_option("--data", data_path, "dataset JSONL")->required();

    CLI::App* eval = app.add_subcommand("evaluate", "score a checkpoint plus baselines");
    add_common(eval);
    eval->add_option("--checkpoint", ck_path, "checkpoint JSON")->required();
    eval->add_option("--data", data_path, "dataset JSONL")->required();

    CLI::App* exp = app.add_subcommand("export", "prune against a dataset and export the tree");
    add_common(exp);
    exp->add_option("--checkpoint", ck_path, "checkpoint JSON")->required();
    exp->add_option("--data", data_path, "dataset JSONL")->required();
    exp->add_option("--format", format, "dot or json");

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            json j;
            in >> j;
            cfg = config_from_json(j);
        }
        CLI::App* sub = app.get_subcommands().front();
        if (sub->count("--task")) cfg.task = parse_task(task_str);
        if (sub->count("--seed")) {
            cfg.gen.seed = seed;
            cfg.train.seed = seed;
        }
        if (sub->count("--depth")) cfg.train.depth = depth;
        if (sub->count("--memory-dim")) cfg.train.n_m = n_m;
        if (sub->count("--lr")) cfg.train.learning_rate = lr;
        if (sub->count("--trials")) cfg.trials.n_trials = cfg.trials.n_seeds = trials;
        if (sub->count("--parallel-trials")) cfg.trials.parallel = parallel;
        cfg.gen.validate();
        cfg.train.validate();

        if (sub == gen) return cmd_generate(cfg, out_dir);
        if (sub == train) return cmd_train(cfg, data_path, out_dir);
        if (sub == search) return cmd_search(cfg, data_path, out_dir);
        if (sub == eval) return cmd_evaluate(cfg, ck_path, data_path, out_dir);
        return cmd_export(cfg, ck_path, data_path, format, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
