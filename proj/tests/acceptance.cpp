// Acceptance run: one PASS/FAIL line per criterion on stdout, also written to
// acceptance_report.txt in the working directory. Soft criteria are reported
// but do not change the exit code.

#include <chrono>
#include <ctime>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "checks.hpp"
#include "gridnav/evalkit/dataset.hpp"
#include "gridnav/evalkit/pipeline.hpp"
#include "gridnav/evalkit/train.hpp"
#include "gridnav/narrator.hpp"
#include "gridnav/worldgen.hpp"

using namespace gridnav;
namespace fs = std::filesystem;

namespace {

// Desk-scale experiment profile.
constexpr int kPx = 124;
constexpr int kRecordStride = 10;
// About 60-90 s per epoch at 124 px on one core. Combined reaches the 0.1
// loss ratio after roughly 16 epochs; the map variant only feeds criterion 10.
constexpr int kEpochsCombined = 20;
constexpr int kEpochsMap = 12;
constexpr int kSeeds = 10;
constexpr double kTrainBudgetSeconds = 30 * 60;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }
double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

class Report {
public:
    explicit Report(const fs::path& file) : file_(file) {}

    void line(int id, bool pass, const std::string& title, const std::string& detail, bool soft = false) {
        std::ostringstream o;
        o << (pass ? "PASS" : "FAIL") << " [" << id << "] " << title << (soft ? " (soft, reported)" : "") << ": " << detail;
        emit(o.str());
        if (!pass && !soft) hard_failures_++;
    }
    void note(const std::string& s) { emit("    " + s); }
    int hard_failures() const { return hard_failures_; }

private:
    void emit(const std::string& s) {
        std::cout << s << std::endl;
        file_ << s << "\n";
        file_.flush();
    }
    std::ofstream file_;
    int hard_failures_ = 0;
};

int run_shell(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cats(const std::array<double, kNumCategories>& v) {
    std::ostringstream o;
    for (auto c : kAllCategories) o << (c == kAllCategories[0] ? "" : ", ") << to_string(c) << " " << fmt("%.3f", v[static_cast<std::size_t>(index_of(c))]);
    return o.str();
}

std::array<double, kNumCategories> f1s(const MetricsReport& r) {
    std::array<double, kNumCategories> out{};
    for (std::size_t k = 0; k < kNumCategories; ++k) out[k] = r.per_category[k].f1;
    return out;
}

// ---------------------------------------------------------------------------

void gradients(Report& rep) {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::size_t n = 0;
    std::string worst_name;
    for (const auto& g : checks::gradient_suite(2024)) {
        n += g.checked;
        if (g.max_rel_error >= worst) worst = g.max_rel_error, worst_name = g.name;
    }
    const double dt = seconds_since(t0);
    rep.line(1, worst <= 1e-4 && dt < 120, "gradient correctness",
             "max rel error " + fmt("%.2e", worst) + " (" + worst_name + ") over " + std::to_string(n) + " probes, " + fmt("%.1f", dt) + " s");
}

void roundtrip(Report& rep) {
    const auto r = checks::encode_decode_roundtrip(1000, 11);
    rep.line(2, r.category_errors == 0 && r.count_errors == 0 && r.max_position_error_px <= 0.5, "encode/decode roundtrip",
             std::to_string(r.sets) + " sets, " + std::to_string(r.labels) + " labels, " + std::to_string(r.category_errors) +
                 " category errors, max position error " + fmt("%.2e", r.max_position_error_px) + " px");
}

void final_probability(Report& rep) {
    std::mt19937_64 rng(3);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const auto pred = activate(checks::random_tensor({1, kCellChannels, kGridSize, kGridSize}, rng, -4, 4), 0);
        for (const auto& d : decode(pred, Pose(), 0.0)) {
            const auto& c = pred.at(d.row, d.col);
            for (std::size_t q = 0; q < kNumCategories; ++q)
                worst = std::max(worst, std::abs(d.class_probability[q] - c.confidence * c.category[q]));
        }
    }
    double perfect = 0.0;
    for (int k = 0; k < 200; ++k) {
        const auto t = encode_targets(checks::random_cell_labels(rng));
        perfect = std::max(perfect, detection_loss(t, t, LossWeights{}).total);
    }
    rep.line(3, worst <= 1e-12 && perfect == 0.0, "final probability and perfect-prediction loss",
             "max |p - conf*cond| " + fmt("%.1e", worst) + " over 25000 cells, max loss on perfect predictions " + fmt("%.1e", perfect));
}

void raycast(Report& rep) {
    const auto t0 = Clock::now();
    const auto r = checks::raycast_oracle(1000, 5);
    const double dt = seconds_since(t0);
    rep.line(4, r.failures == 0 && dt < 60, "ray-cast oracle",
             std::to_string(r.triples) + " triples, " + std::to_string(r.failures) + " beyond one cell, max error " +
                 fmt("%.4f", r.max_error_m) + " m, " + std::to_string(r.march_disagreements) +
                 " grazed corners missed by marching and confirmed exactly, " + fmt("%.1f", dt) + " s");
}

void augmentation(Report& rep) {
    const auto r = checks::augmentation_consistency(500, 8);
    rep.line(5, r.max_marker_error_px <= 1.0 && r.encode_mismatches == 0 && r.markers == r.transforms, "augmentation consistency",
             std::to_string(r.transforms) + " transforms, max marker error " + fmt("%.3f", r.max_marker_error_px) +
                 " px, max encode error " + fmt("%.3f", r.max_encode_error_cells) + " cells");
}

void tracker(Report& rep) {
    const auto obs = [](double x) { return Observation{Category::OpenRoom, {x, 0.0}, 0.8, 0.0}; };
    Tracker near;
    near.integrate({obs(0.0), obs(0.5)}, 0.0);
    Tracker far;
    far.integrate({obs(0.0), obs(1.5)}, 0.0);
    Tracker life;
    life.integrate({obs(0.0)}, 0.0);
    life.prune(30.0);
    const bool kept_at_30 = life.features().size() == 1;
    life.prune(30.5);
    const bool pruned_after = life.features().empty();
    const double agg = checks::tracker_random_aggregate_error(2000, 6);
    const bool ok = near.features().size() == 1 && far.features().size() == 2 && kept_at_30 && pruned_after && agg <= 1e-12;
    rep.line(6, ok, "tracker contracts",
             "0.5 m -> " + std::to_string(near.features().size()) + " cluster, 1.5 m -> " + std::to_string(far.features().size()) +
                 " clusters, 30 s member kept " + (kept_at_30 ? "yes" : "no") + ", 30.5 s pruned " + (pruned_after ? "yes" : "no") +
                 ", aggregate error " + fmt("%.1e", agg));
}

void narrator(Report& rep) {
    const Pose robot(0, 0, kPi / 2);  // robot frame equals world frame
    const auto say = [&](double deg, double range) -> std::string {
        const double q = deg2rad(deg);
        TrackedFeature f;
        f.id = 1;
        f.category = Category::OpenRoom;
        f.position = {range * std::sin(q), range * std::cos(q)};
        AnnouncementState st;
        const auto u = narrate(robot, {f}, st);
        return u.empty() ? "silent" : to_string(u[0].side);
    };
    const std::string a = say(-90, 3), b = say(0, 3), c = say(90, 3), d = say(40, 3), e = say(0, 6);
    rep.line(7, a == "left" && b == "front" && c == "right" && d == "silent" && e == "silent", "narrator bins",
             "-90 " + a + ", 0 " + b + ", 90 " + c + ", 40 " + d + ", 6 m " + e);
}

void throughput(Report& rep) {
    Net net(nn::NetSpec::for_input(kNetworkPixels), 1);
    nn::Tensor4<float> a(net.input_shape(1)), b(net.input_shape(1));
    net.forward(a, b, nn::Mode::Eval);
    std::vector<double> t;
    for (int i = 0; i < 5; ++i) {
        const auto t0 = Clock::now();
        net.forward(a, b, nn::Mode::Eval);
        t.push_back(seconds_since(t0));
    }
    std::sort(t.begin(), t.end());
    rep.line(11, t[2] < 1.0, "throughput", "combined forward at 244x244, median " + fmt("%.4f", t[2]) + " s (" + fmt("%.1f", 1.0 / t[2]) + " Hz)");
}

// ---------------------------------------------------------------------------
// Desk-scale experiment (criteria 8-10)
// ---------------------------------------------------------------------------

struct Experiment {
    MapSuite suite;
    DatasetIndex index;
    std::vector<Sample> train_set, val_set, test_set;
};

Experiment build_experiment(const fs::path& root, Report& rep) {
    Experiment ex;
    const fs::path maps = root / "suite";
    fs::create_directories(root);
    if (run_shell("'" + std::string(GRIDNAV_CLI) + "' gen-maps --out '" + maps.string() + "' --seed 1 >/dev/null") != 0)
        throw Error("gen-maps failed");
    ex.suite = load_suite(maps / "suite.json");
    DatasetParams dp;
    dp.network_px = kPx;
    dp.record_stride = kRecordStride;
    const auto t0 = Clock::now();
    const auto summary = generate_dataset(ex.suite, dp, 1, root / "data");
    ex.index = load_index(root / "data" / "index.jsonl");
    ex.train_set = load_split(ex.index, "train");
    ex.val_set = load_split(ex.index, "validation");
    ex.test_set = load_split(ex.index, "test");
    rep.note("dataset: " + std::to_string(ex.suite.maps.size()) + " maps, " + std::to_string(ex.index.records.size()) + " frames (" +
             std::to_string(ex.train_set.size()) + " train, " + std::to_string(ex.val_set.size()) + " validation, " +
             std::to_string(ex.test_set.size()) + " test) in " + fmt("%.0f", seconds_since(t0)) + " s");
    std::istringstream table(label_table(summary));
    for (std::string l; std::getline(table, l);) rep.note(l);
    return ex;
}

struct Trained {
    TrainResult result;
    double seconds = 0.0;
    double cpu = 0.0;
};

Trained train_variant(const Experiment& ex, Variant v, int epochs, Report& rep) {
    TrainConfig cfg;
    cfg.variant = v;
    cfg.epochs = epochs;
    cfg.seed = 1;
    const auto t0 = Clock::now();
    const double c0 = cpu_seconds();
    Trained t;
    t.result = train(ex.train_set, ex.val_set, nn::NetSpec::for_input(kPx), cfg, [&](const EpochLog& e) {
        rep.note(std::string(to_string(v)) + " epoch " + std::to_string(e.epoch) + ": train " + fmt("%.4f", e.train.total) +
                 ", validation " + fmt("%.4f", e.val_loss) + ", " + fmt("%.0f", seconds_since(t0)) + " s");
    });
    t.seconds = seconds_since(t0);
    t.cpu = cpu_seconds() - c0;
    return t;
}

// Mean head outputs on object cells by true category, and on empty cells.
void head_statistics(Report& rep, Net& net, const std::vector<Sample>& samples) {
    std::array<double, kNumCategories> conf{}, cls{};
    std::array<int, kNumCategories> n{};
    double empty = 0.0;
    int n_empty = 0;
    for (const auto& s : samples) {
        const ViewSample v = plain_view(s, kPx);
        const auto pred = predict(net, Variant::Combined, {&v}).front();
        const auto tgt = encode_targets(v.labels);
        for (std::size_t k = 0; k < tgt.cells.size(); ++k) {
            const auto& t = tgt.cells[k];
            if (t.confidence < 0.5) {
                empty += pred.cells[k].confidence, ++n_empty;
                continue;
            }
            const auto c = static_cast<std::size_t>(std::max_element(t.category.begin(), t.category.end()) - t.category.begin());
            conf[c] += pred.cells[k].confidence, cls[c] += pred.cells[k].category[c], ++n[c];
        }
    }
    std::ostringstream o;
    o << "mean confidence on empty cells " << fmt("%.3f", empty / std::max(1, n_empty)) << "; on object cells (confidence, true-class probability):";
    for (auto c : kAllCategories) {
        const auto k = static_cast<std::size_t>(index_of(c));
        o << " " << to_string(c) << " " << fmt("%.3f", conf[k] / std::max(1, n[k])) << "/" << fmt("%.3f", cls[k] / std::max(1, n[k]));
    }
    rep.note(o.str());
}

void end_to_end(Report& rep, const Experiment& ex, Trained& comb) {
    const auto& r = comb.result;
    const double final_loss = r.epochs.back().train.total;
    const double ratio = final_loss / r.initial_loss;
    const auto train_maps = std::count_if(ex.suite.maps.begin(), ex.suite.maps.end(), [](const SuiteEntry& e) { return e.split == "train"; });
    const bool enough = train_maps >= 4 && ex.train_set.size() >= 2000;
    rep.line(8, enough && ratio <= 0.1 && comb.cpu <= kTrainBudgetSeconds, "desk-scale training",
             std::to_string(train_maps) + " train maps, " + std::to_string(ex.train_set.size()) + " frames, initial loss " +
                 fmt("%.4f", r.initial_loss) + ", final train loss " + fmt("%.4f", final_loss) + " (ratio " + fmt("%.3f", ratio) +
                 ") after " + std::to_string(r.epochs.size()) + " epochs, " + fmt("%.0f", comb.cpu) + " s CPU (" +
                 fmt("%.0f", comb.seconds) + " s wall), best epoch " + std::to_string(r.best_epoch));
    const MetricsReport m = eval_frames(*r.best, Variant::Combined, ex.test_set, 0.5, 0.5);
    bool all = true;
    for (const auto& c : m.per_category) all = all && c.f1 >= 0.7;
    rep.line(8, all, "desk-scale per-frame F1 >= 0.7 on the held-out map", cats(f1s(m)), true);
    std::istringstream table(report_table(m));
    for (std::string l; std::getline(table, l);) rep.note(l);
    head_statistics(rep, *r.best, ex.test_set);
}

PipelineConfig pipeline_config() {
    PipelineConfig cfg;
    cfg.network_px = kPx;
    return cfg;
}

void tracking_benefit(Report& rep, const Experiment& ex, Net& net) {
    const auto& entry = ex.suite.maps.back();
    const WorldMap world = load_world(ex.suite, entry);
    const Trajectory traj = load_trajectory(ex.suite.root / entry.trajectory);
    const auto res = eval_tracked(world, traj, network_detector(net, Variant::Combined, 0.5), pipeline_config(), false, kSeeds, 42);
    bool all = true;
    for (std::size_t k = 0; k < kNumCategories; ++k) all = all && res.tracked.per_category[k].f1 >= res.per_frame.per_category[k].f1;
    rep.line(9, all, "tracked F1 >= per-frame F1 (combined, " + std::to_string(kSeeds) + " seeds)",
             "tracked " + cats(f1s(res.tracked)) + " | per-frame " + cats(f1s(res.per_frame)), true);
    for (int s = 0; s < kSeeds; ++s)
        rep.note("seed " + std::to_string(s) + ": tracked " + cats(f1s(res.tracked_runs[static_cast<std::size_t>(s)])) +
                 " | per-frame " + cats(f1s(res.per_frame_runs[static_cast<std::size_t>(s)])));
}

void explored_benefit(Report& rep, const Experiment& ex, Net& net) {
    const auto& entry = ex.suite.maps.back();
    const WorldMap world = load_world(ex.suite, entry);
    const Trajectory traj = load_trajectory(ex.suite.root / entry.trajectory);
    const auto det = network_detector(net, Variant::Map, 0.5);
    const auto un = eval_tracked(world, traj, det, pipeline_config(), false, kSeeds, 77);
    const auto ex_ = eval_tracked(world, traj, det, pipeline_config(), true, kSeeds, 77);
    rep.line(10, ex_.tracked.mean_f1() >= un.tracked.mean_f1(), "explored >= unexplored (map variant, " + std::to_string(kSeeds) + " seeds)",
             "mean F1 explored " + fmt("%.3f", ex_.tracked.mean_f1()) + " vs unexplored " + fmt("%.3f", un.tracked.mean_f1()) +
                 "; explored " + cats(f1s(ex_.tracked)) + " | unexplored " + cats(f1s(un.tracked)),
             true);
    for (int s = 0; s < kSeeds; ++s)
        rep.note("seed " + std::to_string(s) + ": explored " + fmt("%.3f", ex_.tracked_runs[static_cast<std::size_t>(s)].mean_f1()) +
                 ", unexplored " + fmt("%.3f", un.tracked_runs[static_cast<std::size_t>(s)].mean_f1()));
}

// ---------------------------------------------------------------------------
// Determinism through the CLI (criterion 12)
// ---------------------------------------------------------------------------

std::vector<fs::path> files_under(const fs::path& root) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
    std::sort(out.begin(), out.end());
    return out;
}

void determinism(Report& rep, const fs::path& root) {
    const std::string cli = GRIDNAV_CLI;
    const std::string script =
        "'" + cli + "' gen-maps --out suite --seed 5 --count 3 --validation 1 --test 1 --nodes 2x2 --test-nodes 2x1 >/dev/null && '" +
        cli + "' gen-data --suite suite/suite.json --out data --seed 5 --image-size 64 --record-stride 40 >/dev/null && '" + cli +
        "' train --dataset data/index.jsonl --out w.bin --seed 5 --epochs 2 --batch-size 8 >/dev/null 2>&1 && '" + cli +
        "' eval-tracked --suite suite/suite.json --split test --weights w.bin --seed 5 --repetitions 2 --out tracked.json "
        "--semantic-out semantic.json >/dev/null";
    int codes[2];
    for (int i = 0; i < 2; ++i) {
        const fs::path dir = root / ("run" + std::to_string(i));
        fs::create_directories(dir);
        codes[i] = run_shell("cd '" + dir.string() + "' && " + script);
    }
    if (codes[0] != 0 || codes[1] != 0) {
        rep.line(12, false, "determinism", "CLI pipeline failed with exit codes " + std::to_string(codes[0]) + ", " + std::to_string(codes[1]));
        return;
    }
    const auto a = files_under(root / "run0"), b = files_under(root / "run1");
    int differing = 0;
    for (const auto& f : a)
        if (!fs::exists(root / "run1" / f) || read_text(root / "run0" / f) != read_text(root / "run1" / f)) {
            ++differing;
            rep.note("differs: " + f.string());
        }
    rep.line(12, a == b && differing == 0, "determinism",
             std::to_string(a.size()) + " files from gen-maps, gen-data, train and eval-tracked compared, " + std::to_string(differing) +
                 " differ");
}

}  // namespace

int main() {
    Report rep("acceptance_report.txt");
    const fs::path work = fs::temp_directory_path() / ("gridnav_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(work);
    try {
        gradients(rep);
        roundtrip(rep);
        final_probability(rep);
        raycast(rep);
        augmentation(rep);
        tracker(rep);
        narrator(rep);
        throughput(rep);
        determinism(rep, work / "cli");

        Experiment ex = build_experiment(work / "experiment", rep);
        Trained comb = train_variant(ex, Variant::Combined, kEpochsCombined, rep);
        end_to_end(rep, ex, comb);
        tracking_benefit(rep, ex, *comb.result.best);
        Trained map = train_variant(ex, Variant::Map, kEpochsMap, rep);
        explored_benefit(rep, ex, *map.result.best);
    } catch (const std::exception& e) {
        rep.line(0, false, "harness", e.what());
    }
    std::error_code ec;
    fs::remove_all(work, ec);
    std::cout << (rep.hard_failures() == 0 ? "acceptance: all hard criteria passed" : "acceptance: hard criteria failed") << std::endl;
    return rep.hard_failures() == 0 ? 0 : 1;
}
