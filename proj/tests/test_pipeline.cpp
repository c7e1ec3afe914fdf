#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "scomo/demo_cohort.hpp"
#include "scomo/error.hpp"
#include "scomo/pipeline.hpp"
#include "scomo/serialization.hpp"

using namespace scomo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("scomo_pipeline_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

DemoCohort small_demo(const std::string& name, std::uint64_t seed = 3) {
    DemoOptions o;
    o.dir = scratch(name);
    o.seed = seed;
    o.participants = 3;
    o.normative_walkers = 6;
    return write_demo_cohort(o);
}

PipelineConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "/base");
}

const std::string kMinimal =
    "config_version = 1\ntrials = t.csv\nnormative_dir = norm\nselections = /abs/s.csv\noutput_dir = out\n";

void replace_in_file(const fs::path& p, const std::string& from, const std::string& to) {
    auto text = slurp(p);
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    text.replace(at, from.size(), to);
    std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("config: defaults, relative paths and round trip") {
    const auto c = parse(kMinimal + "# comment\nseed = 42\nsynth_alpha = -2.5  # trailing\n");
    CHECK(c.trials == fs::path("/base/t.csv"));
    CHECK(c.selections == fs::path("/abs/s.csv"));
    CHECK(c.output_dir == fs::path("/base/out"));
    CHECK_FALSE(c.confidence);
    CHECK(c.seed == 42);
    CHECK(c.synth_alpha == -2.5);
    CHECK(c.filter_cutoff_hz == 6.0);
    CHECK(c.event_threshold_n == 20.0);
    CHECK(c.n_cycles == 8);
    CHECK(c.variance_threshold == 0.95);
    CHECK(c.edge_guard_s == 1.2);

    std::istringstream again(format_config(c));
    const auto d = parse_config(again, "/elsewhere");
    CHECK(d.trials == c.trials);
    CHECK(d.seed == c.seed);
    CHECK(d.synth_alpha == c.synth_alpha);
    CHECK(format_config(d) == format_config(c));
}

TEST_CASE("config: rejected inputs") {
    CHECK_THROWS_WITH_AS(parse("trials = t.csv\n"), doctest::Contains("config_version"), Error);
    CHECK_THROWS_WITH_AS(parse("config_version = 2\n"), doctest::Contains("unsupported"), Error);
    CHECK_THROWS_WITH_AS(parse(kMinimal + "colour = red\n"), doctest::Contains("unknown key 'colour'"), Error);
    CHECK_THROWS_WITH_AS(parse(kMinimal + "seed = 1\nseed = 2\n"), doctest::Contains("duplicate key"), Error);
    CHECK_THROWS_WITH_AS(parse(kMinimal + "just words\n"), doctest::Contains("line 6"), Error);
    CHECK_THROWS_WITH_AS(parse(kMinimal + "synth_alpha = 5.5\n"), doctest::Contains("synth_alpha outside"), Error);
    CHECK_THROWS_WITH_AS(parse(kMinimal + "variance_threshold = 0\n"), doctest::Contains("variance_threshold"),
                         Error);
    CHECK_THROWS_WITH_AS(parse(kMinimal + "n_cycles = 2.5\n"), doctest::Contains("integer"), Error);
    CHECK_THROWS_AS(parse(kMinimal + "seed = -1\n"), Error);
    CHECK_THROWS_AS(parse(kMinimal + "filter_cutoff_hz = six\n"), Error);
    CHECK_THROWS_AS(parse(kMinimal + "deviation_mode = sum_sines\n"), Error);
    CHECK_THROWS_AS(parse(kMinimal + "cycle_side = left\n"), Error);
    CHECK_THROWS_AS(parse("config_version = 1\ntrials = t.csv\n"), Error);
}

TEST_CASE("stage names") {
    for (Stage s : kAllStages) CHECK(parse_stage(to_string(s)) == s);
    CHECK_THROWS_AS(parse_stage("plot"), Error);
}

TEST_CASE("manifest: session captures and malformed rows") {
    const auto demo = small_demo("manifest");
    const auto rows = read_trial_manifest(demo.config.parent_path() / "data/trials.csv");
    CHECK(rows.size() == 3 * 12 * 6);
    const auto caps = session_captures(rows);
    REQUIRE(caps.size() == 36);
    CHECK(caps.front().session_id == "P01-d1-s1");
    CHECK(caps[11].session_id == "P01-d4-s3");
    CHECK(caps[12].robotic_side == BodySide::left);
    for (const auto& r : rows) {
        CHECK(r.trajectory.empty() == (r.trial != 6));
        CHECK(r.speed_request.has_value() == (r.day > 1 && r.trial % 3 == 0));
    }

    const auto bad = demo.config.parent_path() / "bad.csv";
    std::ofstream(bad) << "participant_id,day,session,trial,speed_mps,handrail_free\nP01,1,1,1,0.3\n";
    CHECK_THROWS_WITH_AS(read_trial_manifest(bad), doctest::Contains("5 cells, expected 6"), Error);
    std::ofstream(bad) << "participant_id,day,session,trial,speed_mps\nP01,1,1,1,0.3\n";
    CHECK_THROWS_WITH_AS(read_trial_manifest(bad), doctest::Contains("missing column 'handrail_free'"), Error);
    std::ofstream(bad) << "participant_id,day,session,trial,speed_mps,handrail_free\nP01,1,1,1,fast,true\n";
    CHECK_THROWS_WITH_AS(read_trial_manifest(bad), doctest::Contains("bad.csv:2 speed_mps"), Error);
}

TEST_CASE("full run writes every stage output") {
    const auto demo = small_demo("full");
    const auto cfg = load_config(demo.config);
    std::ostringstream log;
    const auto r = run_pipeline(cfg, &log);
    INFO(log.str());
    REQUIRE(r.exit_code == 0);
    const auto out = demo.output_dir;
    for (const char* f : {"ingest.csv", "normative_model.json", "fit.csv", "synth.csv", "deviation.csv", "params.csv",
                          "scomo.csv", "correlation_frontal.csv", "correlation_robotic_45.csv",
                          "correlation_contralateral_45.csv", "report.json", "stats.json", "reports/P01.json",
                          "reports/P03.json", "models/P02-d3-s2.json", "ingest/P03-d4-s3.events.json",
                          "synth/P02-d4-s3.robotic_45.jsonl", "synth/P02-d4-s3.frontal.csv"})
        CHECK_MESSAGE(fs::exists(out / f), f);
    CHECK_FALSE(fs::exists(out / "error.json"));

    std::istringstream params(slurp(out / "params.csv"));
    const auto rows = read_params_csv(params);
    REQUIRE(rows.size() == 36);
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(std::abs(rows[i].params.st_si) <= 1e-9);
        CHECK(std::abs(rows[i].params.sl_si) <= 1e-9);
    }
    // Impaired participants: robotic steps shorter than contralateral ones.
    CHECK(rows[12].params.sl_si < -5.0);

    const auto report = read_json_file(out / "report.json");
    CHECK(report.at("kind") == "cohort_report");
    CHECK(report.at("mixed_models").at("status") == "ok");
    const auto p2 = read_json_file(out / "reports/P02.json");
    CHECK(p2.at("sessions").size() == 12);
}

TEST_CASE("missing GRF path fails the ingest stage with exit code 2") {
    const auto demo = small_demo("missing_grf");
    replace_in_file(demo.config.parent_path() / "data/trials.csv", "captures/P02-d2-s1.grf_robotic.csv", "");
    const auto cfg = load_config(demo.config);
    const auto r = run_pipeline(cfg);
    CHECK(r.exit_code == 2);
    REQUIRE(r.failed_stage);
    CHECK(*r.failed_stage == Stage::ingest);
    const auto err = read_json_file(demo.output_dir / "error.json");
    CHECK(err.at("stage") == "ingest");
    CHECK(err.at("kind") == "not_found");
    CHECK(err.at("message").get<std::string>().find("P02-d2-s1") != std::string::npos);
    CHECK_FALSE(fs::exists(demo.output_dir / "ingest.csv"));
}

TEST_CASE("same inputs and seed give byte-identical outputs") {
    const auto a = small_demo("det_a", 11);
    const auto b = small_demo("det_b", 11);
    REQUIRE(run_pipeline(load_config(a.config)).exit_code == 0);
    REQUIRE(run_pipeline(load_config(b.config)).exit_code == 0);
    std::size_t files = 0;
    for (const auto& f : fs::recursive_directory_iterator(a.output_dir)) {
        if (!f.is_regular_file()) continue;
        const auto rel = fs::relative(f.path(), a.output_dir);
        REQUIRE_MESSAGE(fs::exists(b.output_dir / rel), rel.string());
        CHECK_MESSAGE(slurp(f.path()) == slurp(b.output_dir / rel), rel.string());
        ++files;
    }
    std::size_t other = 0;
    for (const auto& f : fs::recursive_directory_iterator(b.output_dir)) other += f.is_regular_file();
    CHECK(files == other);
    CHECK(files > 100);
}

TEST_CASE("stages run on their own and failures leave earlier outputs alone") {
    const auto demo = small_demo("stages");
    const auto cfg = load_config(demo.config);
    const Stage params[] = {Stage::params};
    auto r = run_pipeline(cfg, params);
    CHECK(r.exit_code == 2);
    CHECK(read_json_file(demo.output_dir / "error.json").at("message").get<std::string>().find("run ingest") !=
          std::string::npos);

    const Stage first[] = {Stage::ingest, Stage::params};
    REQUIRE(run_pipeline(cfg, first).exit_code == 0);
    CHECK_FALSE(fs::exists(demo.output_dir / "error.json"));
    CHECK_FALSE(fs::exists(demo.output_dir / "fit.csv"));
    const auto params_before = slurp(demo.output_dir / "params.csv");

    replace_in_file(cfg.selections, "alpha1", "alpha");
    const Stage correlate[] = {Stage::correlate};
    r = run_pipeline(cfg, correlate);
    CHECK(r.exit_code == 2);
    CHECK(read_json_file(demo.output_dir / "error.json").at("stage") == "correlate");
    CHECK(slurp(demo.output_dir / "params.csv") == params_before);
    CHECK_FALSE(fs::exists(demo.output_dir / "scomo.csv"));

    replace_in_file(cfg.selections, "alpha", "alpha1");
    CHECK(run_pipeline(cfg, correlate).exit_code == 0);
    CHECK_FALSE(fs::exists(demo.output_dir / "error.json"));
    CHECK(fs::exists(demo.output_dir / "scomo.csv"));
}

TEST_CASE("report stage enforces the protocol on imported selections") {
    const auto demo = small_demo("protocol");
    const auto cfg = load_config(demo.config);
    // Out of every slider range.
    const auto sel = slurp(cfg.selections);
    const auto line = sel.find("P02,2,1,frontal,1,");
    REQUIRE(line != std::string::npos);
    const auto end = sel.find('\n', line);
    replace_in_file(cfg.selections, sel.substr(line, end - line), "P02,2,1,frontal,1,4.9999");
    const auto r = run_pipeline(cfg);
    CHECK(r.exit_code == 2);
    const auto err = read_json_file(demo.output_dir / "error.json");
    CHECK(err.at("stage") == "report");
    CHECK(err.at("message").get<std::string>().find("P02-d2-s1") != std::string::npos);
}
