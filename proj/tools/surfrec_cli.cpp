// Command-line front end: prepare / train / reconstruct / evaluate /
// gen-analytic. Exit codes: 0 success, 2 configuration error, 3 input error,
// 4 runtime failure.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "surfrec/errors.hpp"
#include "surfrec/pipeline.hpp"

namespace {

struct Overrides {
    std::optional<int> depth;
    std::optional<std::size_t> max_batch;
    std::optional<std::uint32_t> force_parts;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps;
};

void add_common(CLI::App* cmd, std::string& config_path, Overrides& over) {
    cmd->add_option("--config", config_path, "configuration file (INI-style)");
    cmd->add_option("--depth", over.depth, "octree depth override");
    cmd->add_option("--max-batch", over.max_batch, "partition cap override");
    cmd->add_option("--force-parts", over.force_parts,
                    "minimum part count override");
    cmd->add_option("--workers", over.workers,
                    "worker thread count (default: SURFREC_WORKERS env, then "
                    "hardware)");
    cmd->add_option("--seed", over.seed, "pipeline seed override");
    cmd->add_option("--steps", over.steps, "training step count override");
}

surfrec::PipelineConfig resolve_config(const std::string& path,
                                       const Overrides& over) {
    surfrec::PipelineConfig cfg =
        path.empty() ? surfrec::PipelineConfig{} : surfrec::load_config(path);
    if (over.depth) cfg.depth = *over.depth;
    if (over.max_batch) cfg.max_batch = *over.max_batch;
    if (over.force_parts) cfg.force_parts = *over.force_parts;
    if (over.workers) cfg.workers = *over.workers;
    if (over.seed) cfg.seed = *over.seed;
    if (over.steps) cfg.steps = *over.steps;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Point-cloud surface reconstruction via octree-vertex "
                 "classification"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides over;

    // prepare
    auto* prepare = app.add_subcommand(
        "prepare", "Build a training dataset from a cloud and a reference mesh");
    std::string p_cloud, p_mesh, p_out;
    prepare->add_option("--cloud", p_cloud, "oriented point cloud (ply/obj/xyz)")
        ->required();
    prepare->add_option("--gt-mesh", p_mesh, "reference surface mesh (ply/obj)")
        ->required();
    prepare->add_option("--out-dir", p_out, "output dataset directory")
        ->required();
    add_common(prepare, config_path, over);

    // train
    auto* train = app.add_subcommand("train", "Train the classifier");
    std::vector<std::string> t_datasets, t_validate;
    std::string t_ckpt, t_curve;
    train->add_option("--dataset", t_datasets, "dataset directory (repeatable)")
        ->required();
    train->add_option("--validate", t_validate,
                      "held-out dataset directory (repeatable)");
    train->add_option("--checkpoint-out", t_ckpt, "checkpoint output path")
        ->required();
    train->add_option("--curve-out", t_curve, "loss curve CSV output path");
    add_common(train, config_path, over);

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct",
                                   "Reconstruct a surface from a point cloud");
    std::string r_cloud, r_ckpt, r_out, r_labels;
    bool r_baseline = false;
    rec->add_option("--cloud", r_cloud, "oriented point cloud")->required();
    rec->add_option("--checkpoint", r_ckpt, "trained checkpoint");
    rec->add_flag("--baseline", r_baseline,
                  "use the geometric baseline classifier instead of a network");
    rec->add_option("--out", r_out, "output mesh path (ply/obj)")->required();
    rec->add_option("--labels-out", r_labels, "also write vertex labels here");
    add_common(rec, config_path, over);

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Compute evaluation metrics");
    std::string e_pred_mesh, e_gt_mesh, e_pred_labels, e_gt_labels, e_out;
    eval->add_option("--pred-mesh", e_pred_mesh, "predicted mesh");
    eval->add_option("--gt-mesh", e_gt_mesh, "ground-truth mesh");
    eval->add_option("--pred-labels", e_pred_labels, "predicted label file");
    eval->add_option("--gt-labels", e_gt_labels, "ground-truth label file");
    eval->add_option("--out", e_out, "write the JSON report here");
    add_common(eval, config_path, over);

    // gen-analytic
    auto* gen = app.add_subcommand("gen-analytic",
                                   "Emit an analytic test cloud (exact normals)");
    std::string g_shape, g_cloud, g_mesh;
    std::size_t g_count = 50000;
    std::uint64_t g_seed = 0;
    double g_sigma = 0.0;
    gen->add_option("--shape", g_shape, "sphere | torus | plane")->required();
    gen->add_option("--out-cloud", g_cloud, "output cloud path")->required();
    gen->add_option("--out-mesh", g_mesh, "also write the reference mesh");
    gen->add_option("--count", g_count, "sample count");
    gen->add_option("--seed", g_seed, "random seed");
    gen->add_option("--sigma", g_sigma, "Gaussian position noise");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (prepare->parsed()) {
            surfrec::cmd_prepare(p_cloud, p_mesh, p_out,
                                 resolve_config(config_path, over));
        } else if (train->parsed()) {
            surfrec::cmd_train(t_datasets, t_validate, t_ckpt, t_curve,
                               resolve_config(config_path, over));
        } else if (rec->parsed()) {
            if (r_baseline && !r_ckpt.empty())
                throw surfrec::ConfigError(
                    "choose exactly one of --checkpoint and --baseline");
            if (!r_baseline && r_ckpt.empty())
                throw surfrec::ConfigError(
                    "reconstruct needs --checkpoint or --baseline");
            std::optional<std::string> ckpt;
            if (!r_baseline) ckpt = r_ckpt;
            surfrec::cmd_reconstruct(r_cloud, ckpt, r_out,
                                     resolve_config(config_path, over), r_labels);
        } else if (eval->parsed()) {
            auto opt = [](const std::string& s) {
                return s.empty() ? std::optional<std::string>{}
                                 : std::optional<std::string>{s};
            };
            surfrec::MetricsReport report = surfrec::cmd_evaluate(
                e_pred_mesh, opt(e_gt_mesh), opt(e_pred_labels), opt(e_gt_labels),
                resolve_config(config_path, over), e_out);
            std::cout << report.to_json();
        } else if (gen->parsed()) {
            surfrec::cmd_gen_analytic(g_shape, g_cloud, g_mesh, g_count, g_seed,
                                      g_sigma);
        }
    } catch (const surfrec::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const surfrec::MalformedFile& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const surfrec::MissingNormals& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const surfrec::IoFailure& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const surfrec::VersionMismatch& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const surfrec::CorruptCheckpoint& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
