// gridnav command-line interface.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridnav/evalkit/dataset.hpp"
#include "gridnav/evalkit/metrics.hpp"
#include "gridnav/evalkit/pipeline.hpp"
#include "gridnav/evalkit/render.hpp"
#include "gridnav/evalkit/train.hpp"
#include "gridnav/gridnav.hpp"

namespace fs = std::filesystem;
using namespace gridnav;
using nlohmann::json;

namespace {

/// Relative inputs that do not exist are looked up under $GRIDNAV_DATA_DIR.
fs::path input_path(const std::string& p) {
    fs::path path(p);
    if (path.is_relative() && !fs::exists(path))
        if (const char* dir = std::getenv("GRIDNAV_DATA_DIR")) {
            const fs::path alt = fs::path(dir) / path;
            if (fs::exists(alt)) return alt;
        }
    return path;
}

std::pair<int, int> parse_nodes(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw CLI::ValidationError("--nodes", "expected COLSxROWS, e.g. 3x3");
    return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
}

fs::path sidecar_of(const fs::path& pgm) {
    fs::path p = pgm;
    p.replace_extension(".json");
    return p;
}

WorldMap load_world_files(const std::string& map, const std::string& meta, const std::string& labels) {
    const fs::path mp = input_path(map);
    WorldMap w{load_map(mp, meta.empty() ? sidecar_of(mp) : input_path(meta)), {}, mp.stem().string()};
    if (!labels.empty()) w.labels = load_labels(input_path(labels), &w.grid);
    w.validate();
    return w;
}

struct ModelOptions {
    std::string weights;
    std::string variant;
    double tau = 0.5;
};

struct LoadedModel {
    std::unique_ptr<Net> net;
    Variant variant = Variant::Combined;
};

LoadedModel load_model(const ModelOptions& o) {
    LoadedModel m;
    const fs::path wp = input_path(o.weights);
    const auto header = nn::inspect_weights(wp);
    m.net = nn::load_weights<float>(wp);
    const std::string meta_variant = header.metadata.value("variant", std::string("combined"));
    m.variant = variant_from_string(o.variant.empty() ? meta_variant : o.variant);
    return m;
}

void add_model_options(CLI::App* sub, ModelOptions& o, bool required) {
    auto* w = sub->add_option("--weights", o.weights, "Weights file written by 'train'");
    if (required) w->required();
    sub->add_option("--variant", o.variant, "laser | map | combined (default: the variant recorded in the weights)")
        ->check(CLI::IsMember({"laser", "map", "combined"}));
    sub->add_option("--tau", o.tau, "Decode threshold on the final probability")->check(CLI::Range(0.0, 1.0));
}

struct PipelineOptions {
    double radius = 1.0;
    double lifetime = 30.0;
    int detect_stride = 5;
    double noise = 0.0;
    double odom_xy = 0.0;
    double odom_theta = 0.0;
    bool keep_doors = false;
    double match_radius = 0.5;
};

void add_pipeline_options(CLI::App* sub, PipelineOptions& o) {
    sub->add_option("--radius", o.radius, "Tracker cluster radius (m)")->check(CLI::PositiveNumber);
    sub->add_option("--lifetime", o.lifetime, "Tracker member lifetime (s)")->check(CLI::PositiveNumber);
    sub->add_option("--detect-stride", o.detect_stride, "Run the detector on every k-th scan")->check(CLI::PositiveNumber);
    sub->add_option("--noise", o.noise, "LiDAR range noise sigma (m)")->check(CLI::NonNegativeNumber);
    sub->add_option("--odom-sigma-xy", o.odom_xy, "Odometry drift per scan (m)")->check(CLI::NonNegativeNumber);
    sub->add_option("--odom-sigma-theta", o.odom_theta, "Heading drift per scan (rad)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--keep-doors", o.keep_doors, "Do not redraw open-room door panels");
}

PipelineConfig pipeline_config(const PipelineOptions& o, int px) {
    PipelineConfig c;
    c.network_px = px;
    c.detect_stride = o.detect_stride;
    c.tracker.radius = o.radius;
    c.tracker.lifetime = o.lifetime;
    c.lidar.range_noise_sigma = o.noise;
    c.odom_sigma_xy = o.odom_xy;
    c.odom_sigma_theta = o.odom_theta;
    c.randomize_doors = !o.keep_doors;
    c.match_radius = o.match_radius;
    return c;
}

void write_json_lines(const fs::path& path, const std::vector<json>& rows) {
    std::ostringstream s;
    for (const auto& r : rows) s << r.dump() << "\n";
    write_text_atomic(path, s.str());
}

json semantic_to_json(const SemanticMap& m) {
    json a = json::array();
    for (const auto& e : m.entries)
        a.push_back({{"category", std::string(to_string(e.category))}, {"x_m", e.position.x}, {"y_m", e.position.y}, {"t", e.t}});
    return a;
}

/// Predictions for 'render': a JSON array or JSON lines of objects with
/// category, x_m, y_m.
std::vector<PointLabel> load_points(const fs::path& path) {
    const std::string text = read_text(path);
    std::vector<json> rows;
    try {
        const auto j = json::parse(text);
        if (j.is_array())
            for (const auto& e : j) rows.push_back(e);
        else
            rows.push_back(j);
    } catch (const json::parse_error&) {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) rows.push_back(json::parse(line));
    }
    std::vector<PointLabel> out;
    for (const auto& r : rows)
        out.push_back({category_from_string(r.at("category").get<std::string>()), {r.at("x_m").get<double>(), r.at("y_m").get<double>()}});
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gridnav: navigational cue detection on 2D occupancy grids"};
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "TOML config file with the same keys as the flags");
    app.require_subcommand(1);

    // gen-maps
    auto* gm = app.add_subcommand("gen-maps", "Generate a synthetic map suite with labels and trajectories");
    std::string gm_out;
    std::uint64_t gm_seed = 0;
    int gm_count = 6, gm_val = 1, gm_test = 1;
    std::string gm_nodes = "3x3", gm_test_nodes = "3x2";
    gm->add_option("--out", gm_out, "Output directory")->required();
    gm->add_option("--seed", gm_seed, "Random seed")->required();
    gm->add_option("--count", gm_count, "Number of maps")->check(CLI::Range(3, 1000));
    gm->add_option("--validation", gm_val, "Maps tagged validation")->check(CLI::NonNegativeNumber);
    gm->add_option("--test", gm_test, "Maps tagged test (the last ones)")->check(CLI::NonNegativeNumber);
    gm->add_option("--nodes", gm_nodes, "Corridor lattice COLSxROWS for train/validation maps");
    gm->add_option("--test-nodes", gm_test_nodes, "Corridor lattice COLSxROWS for test maps");

    // gen-data
    auto* gd = app.add_subcommand("gen-data", "Simulate the suite trajectories and write a training dataset");
    std::string gd_suite, gd_out;
    std::uint64_t gd_seed = 0;
    DatasetParams gd_params;
    gd->add_option("--suite", gd_suite, "suite.json from gen-maps")->required();
    gd->add_option("--out", gd_out, "Output directory")->required();
    gd->add_option("--seed", gd_seed, "Random seed")->required();
    gd->add_option("--image-size", gd_params.network_px, "Network input size in pixels (stored maps are twice this)")
        ->check(CLI::Range(8, 2048));
    gd->add_option("--record-stride", gd_params.record_stride, "Keep every k-th scan")->check(CLI::PositiveNumber);
    gd->add_option("--passes", gd_params.passes, "Trajectory passes per map")->check(CLI::PositiveNumber);
    gd->add_option("--noise", gd_params.lidar.range_noise_sigma, "LiDAR range noise sigma (m)")->check(CLI::NonNegativeNumber);

    // train
    auto* tr = app.add_subcommand("train", "Train a detector on a dataset index");
    std::string tr_index, tr_out, tr_log, tr_variant = "combined", tr_policy;
    TrainConfig tr_cfg;
    bool tr_no_aug = false;
    tr->add_option("--dataset", tr_index, "index.jsonl from gen-data")->required();
    tr->add_option("--out", tr_out, "Output weights file")->required();
    tr->add_option("--seed", tr_cfg.seed, "Random seed")->required();
    tr->add_option("--variant", tr_variant, "laser | map | combined")->check(CLI::IsMember({"laser", "map", "combined"}));
    tr->add_option("--epochs", tr_cfg.epochs, "Training epochs")->check(CLI::PositiveNumber);
    tr->add_option("--batch-size", tr_cfg.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    tr->add_option("--alpha1", tr_cfg.weights.xent, "Cross-entropy loss weight");
    tr->add_option("--alpha2", tr_cfg.weights.coord, "Coordinate loss weight");
    tr->add_option("--alpha3", tr_cfg.weights.conf, "Confidence loss weight");
    tr->add_option("--policy", tr_policy, "Augmentation policy JSON (default: built-in ranges)");
    tr->add_flag("--no-augment", tr_no_aug, "Disable augmentation");
    tr->add_option("--log", tr_log, "Training log JSON (default: <out>.log.json)");

    // detect
    auto* dt = app.add_subcommand("detect", "Detect features on one frame and print JSON");
    ModelOptions dt_model;
    std::string dt_laser, dt_gmap, dt_out;
    double dt_t = 0.0;
    add_model_options(dt, dt_model, true);
    dt->add_option("--laser", dt_laser, "Laser local map PGM (with JSON sidecar)");
    dt->add_option("--gmap", dt_gmap, "GMap local map PGM (with JSON sidecar)");
    dt->add_option("--t", dt_t, "Timestamp written into the detections");
    dt->add_option("--out", dt_out, "Also write the detections to this file");

    // run
    auto* rn = app.add_subcommand("run", "Replay a trajectory with detection, tracking and narration");
    ModelOptions rn_model;
    PipelineOptions rn_pipe;
    std::string rn_map, rn_meta, rn_labels, rn_traj, rn_logs;
    std::uint64_t rn_seed = 0;
    bool rn_oracle = false, rn_explored = false;
    add_model_options(rn, rn_model, false);
    add_pipeline_options(rn, rn_pipe);
    rn->add_option("--map", rn_map, "Map PGM")->required();
    rn->add_option("--map-meta", rn_meta, "Map metadata JSON (default: PGM path with .json)");
    rn->add_option("--labels", rn_labels, "Labels JSON (door geometry; ground truth for --oracle)");
    rn->add_option("--trajectory", rn_traj, "Trajectory JSON")->required();
    rn->add_option("--seed", rn_seed, "Random seed")->required();
    rn->add_option("--log-dir", rn_logs, "Write detections/tracker/utterance logs here");
    rn->add_flag("--oracle", rn_oracle, "Use ground-truth labels instead of a network");
    rn->add_flag("--explored", rn_explored, "Build the global map with one pass before the run");

    // eval-frames
    auto* ef = app.add_subcommand("eval-frames", "Per-frame precision/recall/F1 on a dataset split");
    ModelOptions ef_model;
    std::string ef_index, ef_split = "test", ef_out;
    std::uint64_t ef_seed = 0;
    double ef_radius = 0.5;
    add_model_options(ef, ef_model, true);
    ef->add_option("--dataset", ef_index, "index.jsonl")->required();
    ef->add_option("--split", ef_split, "Split to evaluate")->check(CLI::IsMember({"train", "validation", "test"}));
    ef->add_option("--seed", ef_seed, "Random seed (recorded in the report)")->required();
    ef->add_option("--match-radius", ef_radius, "Matching radius (m)")->check(CLI::PositiveNumber);
    ef->add_option("--out", ef_out, "Report JSON path");

    // eval-tracked
    auto* et = app.add_subcommand("eval-tracked", "Tracked-map precision/recall/F1 over repeated online runs");
    ModelOptions et_model;
    PipelineOptions et_pipe;
    std::string et_suite, et_split = "test", et_map, et_meta, et_labels, et_traj, et_out, et_sem;
    std::uint64_t et_seed = 0;
    int et_reps = 30, et_px = 0;
    bool et_oracle = false, et_explored = false;
    add_model_options(et, et_model, false);
    add_pipeline_options(et, et_pipe);
    et->add_option("--suite", et_suite, "suite.json; evaluates every map of --split");
    et->add_option("--split", et_split, "Suite split to evaluate")->check(CLI::IsMember({"train", "validation", "test"}));
    et->add_option("--map", et_map, "Single map PGM (instead of --suite)");
    et->add_option("--map-meta", et_meta, "Map metadata JSON (default: PGM path with .json)");
    et->add_option("--labels", et_labels, "Ground-truth labels JSON (with --map)");
    et->add_option("--trajectory", et_traj, "Trajectory JSON (with --map)");
    et->add_option("--seed", et_seed, "Random seed")->required();
    et->add_option("--repetitions", et_reps, "Runs per map")->check(CLI::PositiveNumber);
    et->add_option("--match-radius", et_pipe.match_radius, "Matching radius (m)")->check(CLI::PositiveNumber);
    et->add_option("--image-size", et_px, "Input size for --oracle runs (default 244)");
    et->add_flag("--oracle", et_oracle, "Use ground-truth labels instead of a network");
    et->add_flag("--explored", et_explored, "Replay over an already-built global map");
    et->add_option("--out", et_out, "Report JSON path");
    et->add_option("--semantic-out", et_sem, "Write the first repetition's tracked map (JSON) here");

    // render
    auto* rd = app.add_subcommand("render", "Render predictions over a map as PNG");
    std::string rd_map, rd_meta, rd_pred, rd_truth, rd_out;
    double rd_radius = 0.5;
    int rd_marker = 6;
    rd->add_option("--map", rd_map, "Map PGM")->required();
    rd->add_option("--map-meta", rd_meta, "Map metadata JSON (default: PGM path with .json)");
    rd->add_option("--predictions", rd_pred, "Predictions: JSON array or JSON lines with category, x_m, y_m");
    rd->add_option("--labels", rd_truth, "Ground-truth labels; marks false positives (x) and negatives (o)");
    rd->add_option("--match-radius", rd_radius, "Matching radius (m)")->check(CLI::PositiveNumber);
    rd->add_option("--marker-radius", rd_marker, "Marker radius (px)")->check(CLI::PositiveNumber);
    rd->add_option("--out", rd_out, "Output PNG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (gm->parsed()) {
            const auto nodes = parse_nodes(gm_nodes);
            const auto test_nodes = parse_nodes(gm_test_nodes);
            if (gm_val + gm_test >= gm_count) {
                std::cerr << "usage error: --count must exceed --validation + --test\n";
                return 1;
            }
            fs::create_directories(gm_out);
            MapSuite suite{gm_out, {}};
            for (int i = 0; i < gm_count; ++i) {
                SuiteEntry e;
                e.name = "map" + std::to_string(i);
                e.split = i >= gm_count - gm_test ? "test" : i >= gm_count - gm_test - gm_val ? "validation" : "train";
                WorldGenParams p;
                std::tie(p.nodes_x, p.nodes_y) = e.split == "test" ? test_nodes : nodes;
                std::mt19937_64 rng(derive_seed(gm_seed, static_cast<std::uint64_t>(i)));
                const GeneratedWorld g = generate_world(p, rng, e.name);
                save_world(gm_out, g, e);
                suite.maps.push_back(e);
                std::cout << e.name << " (" << e.split << "): " << g.world.grid.width() << "x" << g.world.grid.height()
                          << " cells, " << g.world.labels.size() << " labels, trajectory " << std::fixed
                          << std::setprecision(1) << g.trajectory.length() << " m\n";
            }
            save_suite(suite, {{"seed", gm_seed}, {"nodes", gm_nodes}, {"test_nodes", gm_test_nodes}});
            return 0;
        }

        if (gd->parsed()) {
            const MapSuite suite = load_suite(input_path(gd_suite));
            const auto summary = generate_dataset(suite, gd_params, gd_seed, gd_out);
            write_text_atomic(fs::path(gd_out) / "summary.json",
                              json{{"seed", gd_seed}, {"image_size", gd_params.network_px}, {"splits", summary_to_json(summary)}}.dump(2) + "\n");
            std::cout << label_table(summary);
            return 0;
        }

        if (tr->parsed()) {
            tr_cfg.variant = variant_from_string(tr_variant);
            tr_cfg.augment = !tr_no_aug;
            if (!tr_policy.empty()) tr_cfg.policy = load_policy(input_path(tr_policy));
            const DatasetIndex idx = load_index(input_path(tr_index));
            const auto train_set = load_split(idx, "train");
            const auto val_set = load_split(idx, "validation");
            if (train_set.empty()) throw Error("dataset has no train records");
            const int px = train_set.front().laser16.px() / 2;
            const nn::NetSpec spec = nn::NetSpec::for_input(px);
            std::cerr << "training " << tr_variant << " on " << train_set.size() << " frames (" << val_set.size()
                      << " validation), " << px << " px\n";
            const auto res = train(train_set, val_set, spec, tr_cfg, [](const EpochLog& e) {
                std::cerr << "epoch " << e.epoch << ": train " << e.train.total << " (xent " << e.train.xent << ", coord "
                          << e.train.coord << ", conf " << e.train.conf << "), validation " << e.val_loss << "\n";
            });
            json meta = res.log;
            meta.erase("netspec");
            nn::save_weights(*res.best, tr_out, meta);
            write_text_atomic(tr_log.empty() ? tr_out + ".log.json" : tr_log, res.log.dump(2) + "\n");
            std::cout << "best epoch " << res.best_epoch << ", validation loss " << res.best_val_loss << "\n";
            return 0;
        }

        if (dt->parsed()) {
            if (dt_laser.empty() && dt_gmap.empty()) {
                std::cerr << "usage error: give --laser and/or --gmap\n";
                return 1;
            }
            auto m = load_model(dt_model);
            const int px = m.net->spec().input_size;
            const auto view_of = [&](const std::string& p) -> LocalMap {
                const LocalMap lm = load_local_map(input_path(p));
                if (std::abs(lm.extent - kStoredExtent) < 1e-9) return network_view(lm, px);
                if (std::abs(lm.extent - kWindowExtent) > 1e-9 || lm.px() != px)
                    throw Error("local map '" + p + "' is neither a 16 m stored map nor a " + std::to_string(px) + " px network view");
                return lm;
            };
            std::optional<LocalMap> laser, gmap;
            if (!dt_laser.empty()) laser = view_of(dt_laser);
            if (!dt_gmap.empty()) gmap = view_of(dt_gmap);
            if ((m.variant != Variant::Map && !laser) || (m.variant != Variant::Laser && !gmap))
                throw Error(std::string("variant '") + to_string(m.variant) + "' needs " +
                            (m.variant == Variant::Combined ? "--laser and --gmap" : m.variant == Variant::Laser ? "--laser" : "--gmap"));
            const LocalMap blank = make_local_map(px, kWindowExtent, Pose{});
            const LocalMap& l = laser ? *laser : blank;
            const LocalMap& g = gmap ? *gmap : blank;
            const auto dets = network_detector(*m.net, m.variant, dt_model.tau)(l, g, laser ? l.anchor_pose : g.anchor_pose);
            json arr = json::array();
            for (const auto& d : dets) arr.push_back(detection_to_json(d, dt_t));
            std::cout << arr.dump() << "\n";
            if (!dt_out.empty()) write_text_atomic(dt_out, arr.dump() + "\n");
            return 0;
        }

        if (rn->parsed()) {
            if (!rn_oracle && rn_model.weights.empty()) {
                std::cerr << "usage error: give --weights or --oracle\n";
                return 1;
            }
            if (rn_oracle && rn_labels.empty()) {
                std::cerr << "usage error: --oracle needs --labels\n";
                return 1;
            }
            const WorldMap world = load_world_files(rn_map, rn_meta, rn_labels);
            const Trajectory traj = load_trajectory(input_path(rn_traj));
            LoadedModel m;
            int px = kNetworkPixels;
            if (!rn_oracle) {
                m = load_model(rn_model);
                px = m.net->spec().input_size;
            }
            OnlineRun run(world, traj, pipeline_config(rn_pipe, px), rn_seed);
            const DetectFn detect = rn_oracle ? oracle_detector(run.world().labels) : network_detector(*m.net, m.variant, rn_model.tau);
            if (rn_explored) run.explore();
            std::vector<json> det_log, trk_log, utt_log;
            const auto res = run.run(detect, [&](const FrameEvent& ev) {
                for (const auto& d : *ev.detections) det_log.push_back(detection_to_json(d, ev.t));
                trk_log.push_back(snapshot_to_json(*ev.snapshot, ev.t));
                for (const auto& line : format_utterances(*ev.utterances)) std::cout << std::fixed << std::setprecision(1) << "[" << ev.t << " s] " << line << "\n";
                for (const auto& u : *ev.utterances) utt_log.push_back(utterance_to_json(u));
            });
            if (!rn_logs.empty()) {
                fs::create_directories(rn_logs);
                write_json_lines(fs::path(rn_logs) / "detections.jsonl", det_log);
                write_json_lines(fs::path(rn_logs) / "tracker.jsonl", trk_log);
                write_json_lines(fs::path(rn_logs) / "utterances.jsonl", utt_log);
                write_text_atomic(fs::path(rn_logs) / "semantic_map.json", semantic_to_json(res.semantic).dump(2) + "\n");
            }
            return 0;
        }

        if (ef->parsed()) {
            auto m = load_model(ef_model);
            const DatasetIndex idx = load_index(input_path(ef_index));
            const auto samples = load_split(idx, ef_split);
            if (samples.empty()) throw Error("dataset has no '" + ef_split + "' records");
            MetricsReport rep = eval_frames(*m.net, m.variant, samples, ef_model.tau, ef_radius);
            rep.meta["split"] = ef_split;
            rep.meta["seed"] = ef_seed;
            const json j = report_to_json(rep);
            std::cout << j.dump(2) << "\n" << report_table(rep, "per-frame, " + ef_split + " split");
            if (!ef_out.empty()) write_text_atomic(ef_out, j.dump(2) + "\n");
            return 0;
        }

        if (et->parsed()) {
            if (!et_oracle && et_model.weights.empty()) {
                std::cerr << "usage error: give --weights or --oracle\n";
                return 1;
            }
            if (et_suite.empty() == et_map.empty()) {
                std::cerr << "usage error: give exactly one of --suite or --map\n";
                return 1;
            }
            if (!et_map.empty() && (et_labels.empty() || et_traj.empty())) {
                std::cerr << "usage error: --map needs --labels and --trajectory\n";
                return 1;
            }
            std::vector<std::pair<WorldMap, Trajectory>> runs;
            if (!et_suite.empty()) {
                const MapSuite suite = load_suite(input_path(et_suite));
                for (const auto& e : suite.maps)
                    if (e.split == et_split) runs.emplace_back(load_world(suite, e), load_trajectory(suite.root / e.trajectory));
                if (runs.empty()) throw Error("suite has no '" + et_split + "' maps");
            } else {
                runs.emplace_back(load_world_files(et_map, et_meta, et_labels), load_trajectory(input_path(et_traj)));
            }
            LoadedModel m;
            int px = et_px > 0 ? et_px : kNetworkPixels;
            if (!et_oracle) {
                m = load_model(et_model);
                px = m.net->spec().input_size;
            }
            const PipelineConfig cfg = pipeline_config(et_pipe, px);
            std::vector<MetricsReport> tracked_runs, frame_runs;
            json per_map = json::array();
            for (std::size_t i = 0; i < runs.size(); ++i) {
                const auto& [world, traj] = runs[i];
                const DetectFn detect = et_oracle ? oracle_detector(world.labels) : network_detector(*m.net, m.variant, et_model.tau);
                const auto r = eval_tracked(world, traj, detect, cfg, et_explored, et_reps, derive_seed(et_seed, i));
                tracked_runs.insert(tracked_runs.end(), r.tracked_runs.begin(), r.tracked_runs.end());
                frame_runs.insert(frame_runs.end(), r.per_frame_runs.begin(), r.per_frame_runs.end());
                per_map.push_back({{"map", world.name}, {"tracked", report_to_json(r.tracked)}, {"per_frame", report_to_json(r.per_frame)}});
                if (i == 0 && !et_sem.empty()) {
                    OnlineRun first(world, traj, cfg, derive_seed(derive_seed(et_seed, i), 0));
                    if (et_explored) first.explore();
                    write_text_atomic(et_sem, semantic_to_json(first.run(detect).semantic).dump(2) + "\n");
                }
            }
            MetricsReport tracked = average_reports(tracked_runs);
            MetricsReport frames = average_reports(frame_runs);
            const json meta = {{"variant", et_oracle ? "oracle" : to_string(m.variant)},
                               {"explored", et_explored},
                               {"repetitions", et_reps},
                               {"seed", et_seed},
                               {"tau", et_model.tau},
                               {"maps", runs.size()}};
            tracked.meta = frames.meta = meta;
            const json j = {{"tracked", report_to_json(tracked)}, {"per_frame", report_to_json(frames)}, {"maps", per_map}};
            std::cout << j.dump(2) << "\n"
                      << report_table(tracked, std::string("tracked map, ") + (et_explored ? "explored" : "unexplored"))
                      << report_table(frames, "per-frame, same runs");
            if (!et_out.empty()) write_text_atomic(et_out, j.dump(2) + "\n");
            return 0;
        }

        if (rd->parsed()) {
            const fs::path mp = input_path(rd_map);
            const OccupancyGrid grid = load_map(mp, rd_meta.empty() ? sidecar_of(mp) : input_path(rd_meta));
            const std::vector<PointLabel> preds = rd_pred.empty() ? std::vector<PointLabel>{} : load_points(input_path(rd_pred));
            std::optional<std::vector<PointLabel>> truth;
            if (!rd_truth.empty()) truth = points_of(load_labels(input_path(rd_truth), &grid));
            const auto out = render_overlay(grid, preds, truth, rd_radius, rd_marker);
            write_png(rd_out, out.image);
            std::cout << "wrote " << rd_out << " (" << out.markers.size() << " markers)\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
