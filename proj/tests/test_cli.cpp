// Copyright 2026 The pemsurv Authors. All Rights Reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& dir() {
    static const fs::path d = [] {
        auto p = fs::temp_directory_path() / "pemsurv_test_cli";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return d;
}

std::string path(const std::string& name) { return (dir() / name).string(); }

std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Run {
    int code = -1;
    std::string out;
};

Run run(const std::string& args) {
    const std::string log = path("last.log");
    const std::string cmd = std::string(PEMSURV_CLI) + " " + args + " > " + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
}

std::size_t lines(const std::string& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string l; std::getline(in, l);) ++n;
    return n;
}

}  // namespace

TEST_CASE("simulate, transform, fit, predict, evaluate") {
    auto r = run("simulate --scenario tve --n 200 --seed 1 --n-noise 2 --out " + path("train.csv") + " --truth " +
                 path("truth.csv") + " --truth-times 1,2");
    REQUIRE(r.code == 0);
    CHECK(lines(path("train.csv")) == 201);
    CHECK(lines(path("truth.csv")) == 401);
    CHECK(slurp(path("truth.csv")).rfind("id,time,survival\n", 0) == 0);
    REQUIRE(run("simulate --n 100 --seed 2 --n-noise 2 --out " + path("test.csv")).code == 0);

    r = run("transform --in " + path("train.csv") + " --out " + path("ped.csv") + " --cuts sub:20 --seed 3");
    REQUIRE(r.code == 0);
    // 20 sampled subjects, some censored: at most 20 event cut-points plus the last follow-up.
    CHECK(r.out.find("PED rows over") != std::string::npos);
    CHECK(fs::exists(path("ped.csv.meta.json")));

    std::ofstream(path("params.toml")) << "[gbt]\nn_rounds = 40\nmax_depth = 3\nlearning_rate = 0.1\n"
                                          "early_stopping_rounds = 5\nmax_bins = 32\n";
    r = run("fit --engine gbt --params " + path("params.toml") + " --train " + path("ped.csv") + " --valid " +
            path("test.csv") + " --out " + path("gbt.json"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("best iteration") != std::string::npos);

    r = run("fit --engine glm --train " + path("ped.csv") + " --ridge 1e-4 --out " + path("glm.json") +
            " --coef-out " + path("coef.csv"));
    REQUIRE(r.code == 0);
    CHECK(slurp(path("coef.csv")).find("x0") != std::string::npos);
    REQUIRE(run("fit --engine km --train " + path("train.csv") + " --out " + path("km.json")).code == 0);

    r = run("predict --model " + path("gbt.json") + " --in " + path("test.csv") + " --times 0.5,1,30 --out " +
            path("pred.csv"));
    REQUIRE(r.code == 0);
    CHECK(lines(path("pred.csv")) == 301);
    std::ifstream pred(path("pred.csv"));
    std::string line;
    std::getline(pred, line);
    CHECK(line == "id,time,survival,extrapolated");
    int extrapolated = 0;
    while (std::getline(pred, line)) {
        const auto last = line.rfind(',');
        const auto prev = line.rfind(',', last - 1);
        const double s = std::stod(line.substr(prev + 1, last - prev - 1));
        CHECK((s >= 0.0 && s <= 1.0));
        extrapolated += line.back() == '1';
    }
    CHECK(extrapolated == 100);

    REQUIRE(run("predict --model " + path("km.json") + " --times 1,2 --out " + path("km_pred.csv")).code == 0);
    CHECK(lines(path("km_pred.csv")) == 3);

    for (const char* m : {"gbt", "glm", "km"}) {
        r = run(std::string("evaluate --model ") + path(std::string(m) + ".json") + " --train " + path("train.csv") +
                " --test " + path("test.csv") + " --out " + path("report.json"));
        CAPTURE(m);
        REQUIRE(r.code == 0);
        CHECK(r.out.find("cause 1 Q50: brier") != std::string::npos);
        const auto j = nlohmann::json::parse(slurp(path("report.json")));
        CHECK(j["engine"] == m);
    }
}

TEST_CASE("competing risks predictions carry one CIF column per cause") {
    REQUIRE(run("simulate --scenario tve_cr --n 150 --seed 4 --n-noise 1 --out " + path("cr.csv")).code == 0);
    auto r = run("fit --engine glm --train " + path("cr.csv") + " --cuts sub:10 --out " + path("cr_glm.json"));
    if (r.code != 0) CHECK(r.out.find("use ridge > 0") != std::string::npos);
    REQUIRE(run("fit --engine glm --ridge 1e-4 --train " + path("cr.csv") + " --cuts sub:10 --out " +
                path("cr_glm.json"))
                .code == 0);
    REQUIRE(run("predict --model " + path("cr_glm.json") + " --in " + path("cr.csv") + " --times 1 --out " +
                path("cr_pred.csv"))
                .code == 0);
    std::ifstream in(path("cr_pred.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "id,time,survival,extrapolated,cif1,cif2");
    CHECK(run("fit --engine km --train " + path("cr.csv") + " --out " + path("x.json")).code == 2);
}

TEST_CASE("files without an id column and with another delimiter") {
    std::ofstream(path("semi.csv")) << "time;status;age\n1.5;1;40\n2.5;0;50\n3.5;1;60\n";
    auto r = run("transform --in " + path("semi.csv") + " --delimiter ';' --out " + path("semi_ped.csv"));
    REQUIRE(r.code == 0);
    CHECK(slurp(path("semi_ped.csv")).find("age") != std::string::npos);
}

TEST_CASE("errors exit with status 2 and a message") {
    auto r = run("transform --in " + path("missing.csv") + " --out " + path("x.csv"));
    CHECK(r.code == 2);
    CHECK(r.out.find("error:") != std::string::npos);
    std::ofstream(path("bad.csv")) << "id,time,status,x\n1,abc,1,0\n";
    r = run("transform --in " + path("bad.csv") + " --out " + path("x.csv"));
    CHECK(r.code == 2);
    CHECK(r.out.find("row 1") != std::string::npos);
    r = run("fit --engine cox --train " + path("bad.csv") + " --out " + path("x.json"));
    CHECK(r.code == 2);
    CHECK(run("frobnicate").code != 0);
}

TEST_CASE("bench writes a manifest that re-runs bit for bit") {
    std::ofstream(path("bench.toml")) << "replications = 1\nn_search = 2\ncv_folds = 2\ngbt_cuts = \"sub:20\"\n"
                                         "[data.synth]\nn = 120\nn_noise = 2\n"
                                         "[gbt]\nn_rounds = 20\nearly_stopping_rounds = 5\n"
                                         "[checks]\nwins = [\"gbt\", \"glm\"]\nmin_wins = 0\n";
    auto r = run("bench --config " + path("bench.toml") + " --out " + path("bench") + " --check --dump-models");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("[PASS] wins@Q50") != std::string::npos);
    CHECK(fs::exists(path("bench/rep1_gbt.json")));
    CHECK(lines(path("bench/results.csv")) == 10);
    r = run("bench --manifest " + path("bench/manifest.json") + " --out " + path("bench2"));
    CHECK(r.code == 0);
    CHECK(r.out.find("9 result rows re-computed, 0 differ") != std::string::npos);

    auto m = nlohmann::json::parse(slurp(path("bench/manifest.json")));
    m["results"][0]["ibs"] = 123.0;
    std::ofstream(path("edited.json")) << m.dump();
    CHECK(run("bench --manifest " + path("edited.json") + " --out " + path("bench3")).code == 1);
    CHECK(run("bench --config a --manifest b").code != 0);
}
