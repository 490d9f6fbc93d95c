#include "doctest.h"
#include "support.hpp"

#include "rpe/app/commands.hpp"
#include "rpe/app/manifest.hpp"
#include "rpe/app/pipeline.hpp"
#include "rpe/config.hpp"

#include "json.hpp"

#include <chrono>
#include <sstream>

using namespace rpe;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;

    std::string value(const std::string& key) const {
        std::istringstream in(out);
        for (std::string line; std::getline(in, line);) {
            if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
        }
        return {};
    }
};

CliResult cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    args.insert(args.begin(), {"--log-level", "off"});
    const int code = app::run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(rpe::test::read_file(p)); }

// Fixture datasets are written once per test binary run.
struct Fixtures {
    rpe::test::ScratchDir dir{"cli"};
    fs::path completion = dir / "fixture-completion";
    fs::path alignment = dir / "fixture-alignment";
    Fixtures() {
        REQUIRE(cli({"make-fixture", "--task", "completion", "--out", completion.string()}).code == 0);
        REQUIRE(cli({"make-fixture", "--task", "alignment", "--out", alignment.string()}).code == 0);
    }
};

Fixtures& fixtures() {
    static Fixtures f;
    return f;
}

ConfigMap dry_run(const std::vector<std::string>& args) {
    const auto r = cli(args);
    REQUIRE(r.code == 0);
    return parse_config_text(r.out);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("shipped configs round-trip") {
    std::size_t seen = 0;
    for (const auto& entry : fs::directory_iterator(app::config_dir())) {
        if (entry.path().extension() != ".conf") continue;
        ++seen;
        const auto map = load_config_file(entry.path());
        const auto again = parse_config_text(serialize_config(map));
        CHECK(again == map);
        if (map.at(kTaskKey) == "completion") {
            CHECK(completion_config_from(again) == completion_config_from(map));
            CHECK(to_config_map(completion_config_from(parse_config_text(serialize_config(
                      to_config_map(completion_config_from(map)))))) == to_config_map(completion_config_from(map)));
        } else {
            CHECK(gcn_config_from(again) == gcn_config_from(map));
        }
    }
    CHECK(seen >= 10);
}

TEST_CASE("preset resolution") {
    const auto yago = dry_run({"train-completion", "--dataset", "yago3-10", "--model", "rpe-rotate", "--dry-run"});
    CHECK(std::stod(yago.at("margin")) == 24.0);
    CHECK(std::stod(yago.at("adversarial_temperature")) == 1.0);
    CHECK(yago.at("dim") == "500");
    CHECK(std::stod(yago.at("learning_rate")) == 0.0002);

    const auto wn = dry_run({"train-completion", "--dataset", "wn18rr", "--dry-run"});
    CHECK(std::stod(wn.at("margin")) == 6.0);
    CHECK(std::stod(wn.at("adversarial_temperature")) == 0.5);
    CHECK(wn.at("batch_size") == "512");
    CHECK(wn.at("negative_sample_size") == "1024");
    CHECK(wn.at(kModelKey) == "rpe-rotate");

    const auto fb = dry_run({"train-completion", "--dataset", "fb15k-237", "--dry-run", "--set", "dim=64",
                             "--lambda", "0.7"});
    CHECK(fb.at("dim") == "64");
    CHECK(std::stod(fb.at("lambda")) == 0.7);
    CHECK(std::stod(fb.at("margin")) == 9.0);

    const auto dbp = dry_run({"train-alignment", "--dataset", "dbp_zh_en", "--dry-run"});
    CHECK(dbp.at("dim") == "128");
    CHECK(dbp.at("num_layers") == "2");
    CHECK(std::stod(dbp.at("lambda")) == 0.5);
    CHECK(std::stod(dbp.at("margin")) == 1.0);
    CHECK(std::stod(dbp.at("l2_weight")) == 0.01);
    CHECK(std::stod(dbp.at("learning_rate")) == 0.001);
    CHECK(std::stod(dbp.at("dropout")) == 0.2);
    CHECK(dbp.at("aggregate_all_layers") == "true");

    const auto ablate = dry_run({"train-alignment", "--dataset", "dbp_zh_en", "--dry-run", "--no-layer-aggregation"});
    CHECK(ablate.at("aggregate_all_layers") == "false");
}

TEST_CASE("usage errors") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"train-completion", "--dataset", "wn18rr", "--no-such-flag"}).code == 2);
    CHECK(cli({"train-completion", "--dataset", "wn18rr", "--dry-run", "--set", "colour=blue"}).code == 2);
    CHECK(cli({"train-completion", "--dataset", "wn18rr", "--dry-run", "--lambda", "0"}).code == 2);
    CHECK(cli({"train-completion", "--dataset", "/nonexistent/dataset"}).code == 3);
    CHECK(cli({"--version"}).code == 0);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("fixture completion run emits every artifact") {
    auto& f = fixtures();
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = cli({"train-completion", "--dataset", f.completion.string(), "--out-dir", (f.dir / "runs").string(),
                        "--deterministic"});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    REQUIRE(r.code == 0);
    CHECK(secs < 60.0);
    const fs::path run = r.value("run_dir");
    CHECK(fs::exists(run / "checkpoint" / "checkpoint.json"));
    CHECK(fs::exists(run / "loss_curve.csv"));
    CHECK(fs::exists(run / "metrics.json"));
    const auto manifest = read_json(run / "manifest.json");
    CHECK(manifest["subcommand"] == "train-completion");
    CHECK(manifest["config"]["max_steps"] == "1500");
    CHECK(manifest["dataset_fingerprints"]["fixture-completion"] ==
          app::dataset_fingerprint(f.completion));
    const auto m = read_json(run / "metrics.json");
    CHECK(m["test"]["mrr"].get<double>() > 0.0);

    // evaluate recomputes the stored test report
    const auto ev = cli({"evaluate", "--checkpoint", (run / "checkpoint").string(), "--dataset",
                         f.completion.string(), "--out-dir", (f.dir / "runs").string()});
    REQUIRE(ev.code == 0);
    CHECK(std::stod(ev.value("mrr")) == doctest::Approx(m["test"]["mrr"].get<double>()).epsilon(1e-12));
}

TEST_CASE("lambda = 1 prototype run reproduces the baseline metrics") {
    auto& f = fixtures();
    const std::vector<std::string> common{"--dataset", f.completion.string(), "--out-dir", (f.dir / "runs").string(),
                                          "--max-steps", "200", "--set", "anchor_penalty=0"};
    auto base_args = std::vector<std::string>{"train-completion", "--model", "rotate"};
    base_args.insert(base_args.end(), common.begin(), common.end());
    auto rpe_args = std::vector<std::string>{"train-completion", "--model", "rpe-rotate", "--lambda", "1"};
    rpe_args.insert(rpe_args.end(), common.begin(), common.end());
    const auto a = cli(base_args), b = cli(rpe_args);
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    const auto ma = read_json(fs::path(a.value("run_dir")) / "metrics.json");
    const auto mb = read_json(fs::path(b.value("run_dir")) / "metrics.json");
    CHECK(ma["test"] == mb["test"]);
}

TEST_CASE("fixture alignment run, sweep and clustering") {
    auto& f = fixtures();
    const auto runs = (f.dir / "runs").string();
    const auto r = cli({"train-alignment", "--dataset", f.alignment.string(), "--out-dir", runs});
    REQUIRE(r.code == 0);
    CHECK(std::stod(r.value("hits@1")) > 0.0);

    const auto sweep = cli({"lambda-sweep", "--dataset", f.alignment.string(), "--out-dir", runs, "--set", "epochs=20"});
    REQUIRE(sweep.code == 0);
    std::istringstream lines(sweep.out);
    std::vector<std::string> rows;
    for (std::string line; std::getline(lines, line);) {
        if (line.rfind("run_dir=", 0) != 0 && !line.empty()) rows.push_back(line);
    }
    REQUIRE(rows.size() == 11);
    CHECK(rows[0] == "lambda,mrr,hits1,hits10");
}

TEST_CASE("dbi ranks the prototype model below the baseline") {
    auto& f = fixtures();
    const auto runs = (f.dir / "runs").string();
    std::vector<std::string> ckpts;
    for (const char* model : {"rotate", "rpe-rotate"}) {
        const auto r = cli({"train-completion", "--dataset", f.completion.string(), "--out-dir", runs, "--model", model});
        REQUIRE(r.code == 0);
        ckpts.push_back((fs::path(r.value("run_dir")) / "checkpoint").string());
    }
    const auto d = cli({"dbi", "--checkpoint", ckpts[0], "--checkpoint", ckpts[1], "--dataset", f.completion.string(),
                        "--min-members", "10", "--out-dir", runs, "--export"});
    REQUIRE(d.code == 0);
    std::istringstream in(d.out);
    std::vector<double> values;
    for (std::string line; std::getline(in, line);) {
        if (const auto at = line.find(" dbi="); at != std::string::npos) values.push_back(std::stod(line.substr(at + 5)));
    }
    REQUIRE(values.size() == 2);
    CHECK(values[1] < values[0]);

    const auto lt = cli({"longtail", "--baseline", ckpts[0], "--rpe", ckpts[1], "--dataset", f.completion.string(),
                         "--out-dir", runs});
    REQUIRE(lt.code == 0);
    CHECK(lt.out.find("all") != std::string::npos);
}

TEST_CASE("fingerprint mismatch is refused") {
    auto& f = fixtures();
    const auto runs = (f.dir / "runs").string();
    const auto r = cli({"train-completion", "--dataset", f.completion.string(), "--out-dir", runs, "--max-steps", "5"});
    REQUIRE(r.code == 0);
    rpe::test::ScratchDir other("other");
    const auto copy = other / "fixture-completion";
    REQUIRE(cli({"make-fixture", "--task", "completion", "--out", copy.string(), "--seed", "8"}).code == 0);
    const auto ev = cli({"evaluate", "--checkpoint", (fs::path(r.value("run_dir")) / "checkpoint").string(),
                         "--dataset", copy.string(), "--out-dir", runs});
    CHECK(ev.code == 6);
}

TEST_CASE("theory and gradient checks") {
    rpe::test::ScratchDir runs("theory");
    const auto th = cli({"theory-check", "--constructed", "--strict", "--out-dir", runs.path().string()});
    CHECK(th.code == 0);
    const auto gc = cli({"gradcheck", "--seed", "1"});
    CHECK(gc.code == 0);
    CHECK(gc.out.find("FAIL") == std::string::npos);
}

TEST_CASE("stats") {
    auto& f = fixtures();
    const auto s = cli({"stats", "--dataset", f.completion.string()});
    REQUIRE(s.code == 0);
    CHECK(s.out.find("540") != std::string::npos);
    const auto j = cli({"stats", "--dataset", f.alignment.string(), "--json"});
    REQUIRE(j.code == 0);
    CHECK(nlohmann::json::parse(j.out).contains("graphs"));
}

TEST_CASE("run directories never collide") {
    rpe::test::ScratchDir base("dirs");
    const auto a = app::make_run_dir(base.path(), 3);
    const auto b = app::make_run_dir(base.path(), 3);
    CHECK(a != b);
    CHECK(a.filename().string().find("-seed3") != std::string::npos);
}

}  // TEST_SUITE
