// airtopo: airway-tree topology repair and evaluation on CT segmentations.
//
// Subcommands: phantom, skeleton, repair, eval, train, classify. Every run
// writes a manifest next to its primary output. All randomness flows from
// --seed. Exit codes: 0 success, 2 validation, 3 I/O, 4 numerical
// divergence.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "airtopo/classifier.hpp"
#include "airtopo/json_support.hpp"
#include "airtopo/metrics.hpp"
#include "airtopo/morphology.hpp"
#include "airtopo/nifti.hpp"
#include "airtopo/phantom.hpp"
#include "airtopo/profile.hpp"
#include "airtopo/repair.hpp"
#include "airtopo/skeleton.hpp"
#include "airtopo/version.hpp"

using namespace airtopo;

namespace {

class StageTimer {
public:
    void start(const std::string& stage) {
        flush();
        current_ = stage;
        t0_ = std::chrono::steady_clock::now();
    }
    json finish() {
        flush();
        return timings_;
    }

private:
    void flush() {
        if (!current_.empty()) {
            const auto dt = std::chrono::steady_clock::now() - t0_;
            timings_[current_] =
                std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(dt).count();
            current_.clear();
        }
    }
    json timings_ = json::object();
    std::string current_;
    std::chrono::steady_clock::time_point t0_;
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError(path + ": cannot open for writing");
    out << text;
    if (!out)
        throw IoError(path + ": write failed");
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError(path + ": cannot open");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
    return j;
}

void write_manifest(const std::string& primary_output, const std::string& subcommand,
                    json inputs, json outputs, json config, std::uint64_t seed, json timings) {
    const json manifest{{"schema_version", kReportSchemaVersion},
                        {"tool_version", kVersion},
                        {"subcommand", subcommand},
                        {"inputs", std::move(inputs)},
                        {"outputs", std::move(outputs)},
                        {"config", std::move(config)},
                        {"seed", seed},
                        {"timings_ms", std::move(timings)}};
    write_text(primary_output + ".manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

int cmd_phantom(const std::string& spec_path, const std::string& out_ct,
                const std::string& out_mask, const std::string& out_broken_mask,
                const std::string& out_broken_ct, const std::string& branch_table_path,
                std::uint64_t seed, bool seed_given) {
    StageTimer timer;
    timer.start("parse_spec");
    const json spec_json = spec_path.empty() ? json::object() : read_json_file(spec_path);
    PhantomSpec spec = phantom_spec_from_json(spec_json);
    if (seed_given) spec.seed = seed;

    timer.start("generate");
    const Phantom ph = generate_phantom(spec);

    timer.start("write");
    write_nifti(ph.volume, out_ct);
    write_nifti(ph.gt_mask, out_mask);
    if (!branch_table_path.empty())
        write_text(branch_table_path, to_json(ph.branches).dump(2) + "\n");

    json outputs{{"ct", out_ct}, {"mask", out_mask}};
    if (spec_json.contains("breaks")) {
        if (out_broken_mask.empty())
            throw ContractError("--out-broken-mask required when the spec defines breaks");
        timer.start("inject_breaks");
        BreakSpec breaks = break_spec_from_json(spec_json.at("breaks"));
        if (seed_given) breaks.seed = seed;
        const BreakOutcome broken = inject_breaks(ph.gt_mask, ph.volume, ph.branches, breaks);
        write_nifti(broken.broken_mask, out_broken_mask);
        outputs["broken_mask"] = out_broken_mask;
        if (!out_broken_ct.empty()) {
            write_nifti(broken.modified_volume, out_broken_ct);
            outputs["broken_ct"] = out_broken_ct;
        }
    }

    write_manifest(out_mask, "phantom", json{{"spec", spec_path}}, outputs, spec_json,
                   spec.seed, timer.finish());
    return 0;
}

int cmd_skeleton(const std::string& mask_path, const std::string& out_path,
                 const std::string& graph_path, double min_spur_mm, std::uint64_t seed) {
    StageTimer timer;
    timer.start("read");
    const BinaryMask mask = read_nifti_mask(mask_path);
    timer.start("skeletonize");
    SkeletonMask skel = skeletonize(mask);
    if (min_spur_mm > 0.0) skel = prune_short_spurs(skel, min_spur_mm);
    timer.start("write");
    write_nifti(skel.mask, out_path);
    json outputs{{"skeleton", out_path}};
    if (!graph_path.empty()) {
        const SkeletonGraph graph = build_graph(skel);
        write_text(graph_path, to_json(graph).dump(2) + "\n");
        outputs["graph"] = graph_path;
    }
    write_manifest(out_path, "skeleton", json{{"mask", mask_path}}, outputs,
                   json{{"min_spur_mm", min_spur_mm}}, seed, timer.finish());
    return 0;
}

int cmd_repair(const std::string& mask_path, const std::string& ct_path,
               const std::string& model_path, const std::string& config_path,
               const std::string& out_path, const std::string& report_path, bool accept_all,
               const RepairConfig& flag_overrides, const std::vector<bool>& flag_set,
               std::uint64_t seed) {
    StageTimer timer;
    timer.start("read");
    const BinaryMask mask = read_nifti_mask(mask_path);
    const Volume3D ct = read_nifti_volume(ct_path);
    if (!mask.same_geometry(ct))
        throw GeometryError("mask and ct geometry mismatch");

    RepairConfig config;
    if (!config_path.empty()) config = repair_config_from_json(read_json_file(config_path));
    if (flag_set[0]) config.search_radius_mm = flag_overrides.search_radius_mm;
    if (flag_set[1]) config.max_bend_deg = flag_overrides.max_bend_deg;
    if (flag_set[2]) config.tangent_window_voxels = flag_overrides.tangent_window_voxels;
    if (flag_set[3]) config.min_gap_voxels = flag_overrides.min_gap_voxels;
    if (flag_set[4]) config.context_voxels = flag_overrides.context_voxels;
    config.classifier_gate = !accept_all;

    ClassifierModel model;
    const ClassifierModel* model_ptr = nullptr;
    if (config.classifier_gate) {
        if (model_path.empty())
            throw ContractError("model required");
        timer.start("load_model");
        model = load_model(model_path);
        model_ptr = &model;
    }

    timer.start("repair");
    const RepairResult result = repair_mask(mask, ct, config, model_ptr);

    timer.start("write");
    write_nifti(result.repaired, out_path);
    write_text(report_path, to_json(result.report).dump(2) + "\n");

    write_manifest(out_path, "repair",
                   json{{"mask", mask_path}, {"ct", ct_path}, {"model", model_path}},
                   json{{"repaired", out_path}, {"report", report_path}}, to_json(config), seed,
                   timer.finish());
    return 0;
}

int cmd_eval(const std::vector<std::string>& pred_paths, const std::vector<std::string>& gt_paths,
             const std::string& json_path, bool table, bool no_largest_cc, bool with_hd95,
             int jobs, std::uint64_t seed) {
    if (pred_paths.size() != gt_paths.size())
        throw ContractError("need one --gt per --pred");
    if (pred_paths.empty())
        throw ContractError("need at least one --pred/--gt pair");

    StageTimer timer;
    timer.start("evaluate");
    std::vector<json> results(pred_paths.size());
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto eval_one = [&](std::size_t i) {
        const BinaryMask gt = read_nifti_mask(gt_paths[i]);
        BinaryMask pred = read_nifti_mask(pred_paths[i]);
        if (!pred.same_geometry(gt))
            throw GeometryError(pred_paths[i] + ": geometry mismatch with ground truth");
        if (!no_largest_cc) pred = largest_component(pred);
        MetricsReport r = evaluate(pred, gt, with_hd95);
        json j = to_json(r);
        j["pred"] = pred_paths[i];
        j["gt"] = gt_paths[i];
        results[i] = std::move(j);
    };

    if (jobs <= 1 || pred_paths.size() == 1) {
        for (std::size_t i = 0; i < pred_paths.size(); ++i) eval_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        const int n = std::min<int>(jobs, static_cast<int>(pred_paths.size()));
        for (int w = 0; w < n; ++w)
            workers.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < pred_paths.size(); i = next.fetch_add(1)) {
                    try {
                        eval_one(i);
                    } catch (...) {
                        std::lock_guard<std::mutex> lk(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                    }
                }
            });
        for (auto& t : workers) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    const json out = results.size() == 1 ? results[0] : json(results);
    if (!json_path.empty()) {
        write_text(json_path, out.dump(2) + "\n");
        write_manifest(json_path, "eval", json{{"pred", pred_paths}, {"gt", gt_paths}},
                       json{{"json", json_path}},
                       json{{"largest_cc", !no_largest_cc}, {"hd95", with_hd95}, {"jobs", jobs}},
                       seed, timer.finish());
    } else {
        std::cout << out.dump(2) << "\n";
    }
    if (table) {
        for (std::size_t i = 0; i < results.size(); ++i) {
            MetricsReport r;
            r.dice = results[i].at("dice").get<double>();
            r.tpr = results[i].at("tpr").get<double>();
            r.fpr = results[i].at("fpr").get<double>();
            r.ji = results[i].at("ji").get<double>();
            r.hd_mm = results[i].at("hd_mm").get<double>();
            r.td = results[i].at("td").get<double>();
            std::cout << metrics_table(r);
        }
    }
    return 0;
}

int cmd_train(const std::string& gt_path, const std::string& ct_path,
              const std::string& phantom_spec_path, const std::string& out_path,
              const std::string& export_data_path, int per_class, TrainHyper hyper,
              std::uint64_t seed) {
    hyper.seed = seed;
    StageTimer timer;

    BinaryMask gt(1, 1, 1, Spacing{1, 1, 1});
    Volume3D ct(1, 1, 1, Spacing{1, 1, 1});
    json inputs;
    if (!phantom_spec_path.empty()) {
        timer.start("phantom");
        PhantomSpec spec = phantom_spec_from_json(read_json_file(phantom_spec_path));
        spec.seed = seed;
        Phantom ph = generate_phantom(spec);
        gt = std::move(ph.gt_mask);
        ct = std::move(ph.volume);
        inputs = json{{"phantom_spec", phantom_spec_path}};
    } else {
        if (gt_path.empty() || ct_path.empty())
            throw ContractError("train needs --gt and --ct, or --phantom-spec");
        timer.start("read");
        gt = read_nifti_mask(gt_path);
        ct = read_nifti_volume(ct_path);
        if (!gt.same_geometry(ct))
            throw GeometryError("gt and ct geometry mismatch");
        inputs = json{{"gt", gt_path}, {"ct", ct_path}};
    }

    timer.start("synthesize");
    const TrainingSet data = synthesize_training_set(gt, ct, static_cast<std::size_t>(per_class), seed);
    if (!export_data_path.empty()) save_training_set(data, export_data_path);

    timer.start("train");
    const TrainResult result = train(data, hyper);

    timer.start("write");
    save_model(result.model, out_path);

    json config{{"per_class", per_class},
                {"lr", hyper.lr},
                {"momentum", hyper.momentum},
                {"batch", hyper.batch},
                {"epochs", hyper.epochs},
                {"val_fraction", hyper.val_fraction},
                {"target_val_accuracy", hyper.target_val_accuracy}};
    json outputs{{"model", out_path}};
    if (!export_data_path.empty()) outputs["training_data"] = export_data_path;
    json manifest_extra{{"epochs_run", result.epochs_run},
                        {"final_train_loss", result.train_loss.empty() ? 0.0 : result.train_loss.back()},
                        {"final_val_accuracy",
                         result.val_accuracy.empty() ? json() : json(result.val_accuracy.back())}};
    config["result"] = std::move(manifest_extra);
    write_manifest(out_path, "train", inputs, outputs, config, seed, timer.finish());
    return 0;
}

int cmd_classify(const std::string& model_path, const std::string& profiles_path,
                 const std::string& json_path, std::uint64_t seed) {
    StageTimer timer;
    timer.start("load");
    const ClassifierModel model = load_model(model_path);
    const TrainingSet data = load_training_set(profiles_path);

    timer.start("classify");
    json records = json::array();
    std::size_t agree = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Classification c = classify(model, data.profiles[i]);
        if (c.label == data.labels[i]) ++agree;
        records.push_back(json{{"index", i},
                               {"label", to_string(c.label)},
                               {"probabilities", c.probabilities},
                               {"record_label", to_string(data.labels[i])}});
    }
    json out{{"schema_version", kReportSchemaVersion},
             {"records", std::move(records)},
             {"agreement_with_record_labels",
              data.size() ? static_cast<double>(agree) / static_cast<double>(data.size()) : 0.0}};
    if (!json_path.empty()) {
        write_text(json_path, out.dump(2) + "\n");
        write_manifest(json_path, "classify",
                       json{{"model", model_path}, {"profiles", profiles_path}},
                       json{{"json", json_path}}, json::object(), seed, timer.finish());
    } else {
        std::cout << out.dump(2) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"airway-tree discontinuity repair and segmentation evaluation"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "seed for every random draw")->capture_default_str();

    // phantom
    auto* phantom = app.add_subcommand("phantom", "generate a synthetic airway-tree phantom");
    std::string ph_spec, ph_ct, ph_mask, ph_broken_mask, ph_broken_ct, ph_table;
    phantom->add_option("--spec", ph_spec, "phantom spec JSON (with optional breaks)");
    phantom->add_option("--out-ct", ph_ct, "output CT volume (.nii)")->required();
    phantom->add_option("--out-mask", ph_mask, "output ground-truth mask (.nii)")->required();
    phantom->add_option("--out-broken-mask", ph_broken_mask, "output mask with injected breaks");
    phantom->add_option("--out-broken-ct", ph_broken_ct, "output CT with injected obstructions");
    phantom->add_option("--branch-table", ph_table, "output branch table JSON");

    // skeleton
    auto* skeleton_cmd = app.add_subcommand("skeleton", "thin a mask and export its centerline");
    std::string sk_mask, sk_out, sk_graph;
    double sk_min_spur = 0.0;
    skeleton_cmd->add_option("--mask", sk_mask, "input mask (.nii)")->required();
    skeleton_cmd->add_option("--out", sk_out, "output skeleton mask (.nii)")->required();
    skeleton_cmd->add_option("--graph", sk_graph, "output graph JSON");
    skeleton_cmd->add_option("--min-spur-mm", sk_min_spur,
                             "prune leaf spurs shorter than this (default: no pruning)");

    // repair
    auto* repair = app.add_subcommand("repair", "reconnect airway discontinuities");
    std::string rp_mask, rp_ct, rp_model, rp_config, rp_out, rp_report;
    bool rp_accept_all = false;
    RepairConfig rp_flags;
    repair->add_option("--mask", rp_mask, "input segmentation mask (.nii)")->required();
    repair->add_option("--ct", rp_ct, "input CT volume (.nii)")->required();
    repair->add_option("--model", rp_model, "classifier model file");
    repair->add_option("--config", rp_config, "repair config JSON");
    repair->add_option("--out", rp_out, "output repaired mask (.nii)")->required();
    repair->add_option("--report", rp_report, "output repair report JSON")->required();
    repair->add_flag("--accept-all", rp_accept_all, "bypass the classifier gate");
    auto* o0 = repair->add_option("--search-radius-mm", rp_flags.search_radius_mm);
    auto* o1 = repair->add_option("--max-bend-deg", rp_flags.max_bend_deg);
    auto* o2 = repair->add_option("--tangent-window", rp_flags.tangent_window_voxels);
    auto* o3 = repair->add_option("--min-gap-voxels", rp_flags.min_gap_voxels);
    auto* o4 = repair->add_option("--context-voxels", rp_flags.context_voxels);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "compute the metric suite on mask pairs");
    std::vector<std::string> ev_pred, ev_gt;
    std::string ev_json;
    bool ev_table = false, ev_no_lcc = false, ev_hd95 = false;
    int ev_jobs = 1;
    eval_cmd->add_option("--pred", ev_pred, "predicted mask(s)")->required();
    eval_cmd->add_option("--gt", ev_gt, "ground-truth mask(s)")->required();
    eval_cmd->add_option("--json", ev_json, "write the report JSON here (default: stdout)");
    eval_cmd->add_flag("--table", ev_table, "also print an aligned table");
    eval_cmd->add_flag("--no-largest-cc", ev_no_lcc, "evaluate the prediction as-is");
    eval_cmd->add_flag("--hd95", ev_hd95, "additionally report the 95th-percentile Hausdorff");
    eval_cmd->add_option("--jobs", ev_jobs, "parallel scans for batch eval")->capture_default_str();

    // train
    auto* train_cmd = app.add_subcommand("train", "synthesize profiles and train the classifier");
    std::string tr_gt, tr_ct, tr_phantom, tr_out, tr_export;
    int tr_per_class = 2000;
    TrainHyper tr_hyper;
    train_cmd->add_option("--gt", tr_gt, "ground-truth mask (.nii)");
    train_cmd->add_option("--ct", tr_ct, "CT volume (.nii)");
    train_cmd->add_option("--phantom-spec", tr_phantom, "generate the training pair from this phantom spec");
    train_cmd->add_option("--out", tr_out, "output model file")->required();
    train_cmd->add_option("--export-data", tr_export, "also write the synthesized profiles");
    train_cmd->add_option("--per-class", tr_per_class, "samples per class")->capture_default_str();
    train_cmd->add_option("--epochs", tr_hyper.epochs)->capture_default_str();
    train_cmd->add_option("--batch", tr_hyper.batch)->capture_default_str();
    train_cmd->add_option("--lr", tr_hyper.lr)->capture_default_str();
    train_cmd->add_option("--momentum", tr_hyper.momentum)->capture_default_str();
    train_cmd->add_option("--val-fraction", tr_hyper.val_fraction)->capture_default_str();
    train_cmd->add_option("--target-accuracy", tr_hyper.target_val_accuracy,
                          "stop once validation accuracy reaches this (0 = run all epochs)");

    // classify
    auto* classify_cmd = app.add_subcommand("classify", "classify saved intensity profiles");
    std::string cl_model, cl_profiles, cl_json;
    classify_cmd->add_option("--model", cl_model, "classifier model file")->required();
    classify_cmd->add_option("--profiles", cl_profiles, "profile records file")->required();
    classify_cmd->add_option("--json", cl_json, "write results JSON here (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help / --version
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*phantom)
            return cmd_phantom(ph_spec, ph_ct, ph_mask, ph_broken_mask, ph_broken_ct, ph_table,
                               seed, app.count("--seed") > 0);
        if (*skeleton_cmd)
            return cmd_skeleton(sk_mask, sk_out, sk_graph, sk_min_spur, seed);
        if (*repair) {
            const std::vector<bool> flag_set{o0->count() > 0, o1->count() > 0, o2->count() > 0,
                                             o3->count() > 0, o4->count() > 0};
            return cmd_repair(rp_mask, rp_ct, rp_model, rp_config, rp_out, rp_report,
                              rp_accept_all, rp_flags, flag_set, seed);
        }
        if (*eval_cmd)
            return cmd_eval(ev_pred, ev_gt, ev_json, ev_table, ev_no_lcc, ev_hd95, ev_jobs, seed);
        if (*train_cmd)
            return cmd_train(tr_gt, tr_ct, tr_phantom, tr_out, tr_export, tr_per_class, tr_hyper, seed);
        if (*classify_cmd)
            return cmd_classify(cl_model, cl_profiles, cl_json, seed);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << " (epoch " << e.epoch << ")\n";
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
