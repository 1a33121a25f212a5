// Drives the installed binary through the FDM_CLI environment variable set
// by CTest.

#include <catch2/catch.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
    const char* env = std::getenv("FDM_CLI");
    REQUIRE(env != nullptr);
    return env;
}

int run(const std::string& args) {
    std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("fdm_cli_test_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& s) const { return (path / s).string(); }
};

}  // namespace

TEST_CASE("gen-data writes datasets deterministically") {
    TempDir dir;
    std::string a = dir / "a.fdmv", b = dir / "b.fdmv";
    REQUIRE(run("gen-data town-drive --count 5 --n 40 --seed 1 --out " + a) == 0);
    REQUIRE(run("gen-data town-drive --count 5 --n 40 --seed 1 --out " + b) == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(fs::exists(a + ".meta"));
    CHECK(fs::exists(a + ".config"));

    SECTION("different seeds differ") {
        std::string c = dir / "c.fdmv";
        REQUIRE(run("gen-data town-drive --count 5 --n 40 --seed 2 --out " + c) == 0);
        CHECK(slurp(a) != slurp(c));
    }
}

TEST_CASE("gen-data usage errors exit 1") {
    TempDir dir;
    CHECK(run("gen-data town-drive --count 0 --n 40 --seed 1 --out " + (dir / "x.fdmv")) == 1);
    CHECK(run("gen-data town-drive --n 40 --out " + (dir / "x.fdmv")) == 1);  // missing seed
    CHECK(run("gen-data") == 1);
}

TEST_CASE("unknown generator is a validation failure (exit 2)") {
    TempDir dir;
    CHECK(run("gen-data bogus --count 2 --n 40 --seed 1 --out " + (dir / "x.fdmv")) == 2);
}

TEST_CASE("train / sample / evaluate round trip with reproducible artifacts") {
    TempDir dir;
    std::string data = dir / "town.fdmv";
    REQUIRE(run("gen-data town-drive --count 8 --n 40 --seed 3 --out " + data) == 0);

    std::string train_flags = " --data " + data +
                              " --seed 4 --k 6 --t 10 --steps 6 --batch 2 --channels 12"
                              " --blocks 1 --heads 2 --log-every 2";
    REQUIRE(run("train --out " + (dir / "m1") + train_flags) == 0);
    REQUIRE(run("train --out " + (dir / "m2") + train_flags) == 0);
    CHECK(slurp(dir / "m1/checkpoint.fdmp") == slurp(dir / "m2/checkpoint.fdmp"));
    CHECK(slurp(dir / "m1/loss.csv") == slurp(dir / "m2/loss.csv"));
    CHECK(fs::exists(dir / "m1/run_config.txt"));

    SECTION("steps 0 leaves the checkpoint at initialization") {
        REQUIRE(run("train --out " + (dir / "m0") + " --data " + data +
                    " --seed 4 --k 6 --t 10 --steps 0 --channels 12 --blocks 1 --heads 2") == 0);
        // a resumed zero-step run from m0 reproduces m0 exactly
        REQUIRE(run("train --out " + (dir / "m0b") + " --data " + data +
                    " --seed 9 --k 6 --t 10 --steps 0 --channels 12 --blocks 1 --heads 2"
                    " --resume " +
                    (dir / "m0/checkpoint.fdmp")) == 0);
        CHECK(slurp(dir / "m0/checkpoint.fdmp") == slurp(dir / "m0b/checkpoint.fdmp"));
    }

    std::string sample_flags = " --model " + (dir / "m1") + " --data " + data +
                               " --scheme autoreg --n-obs 10 --count 2 --seed 5";
    REQUIRE(run("sample --out " + (dir / "s1") + sample_flags) == 0);
    REQUIRE(run("sample --out " + (dir / "s2") + sample_flags) == 0);
    CHECK(slurp(dir / "s1/completions.fdmv") == slurp(dir / "s2/completions.fdmv"));
    CHECK(fs::exists(dir / "s1/per_video_metrics.csv"));

    SECTION("observed prefix of completions matches the source bytes") {
        std::string src = slurp(data);
        std::string out = slurp(dir / "s1/completions.fdmv");
        // both files share the 20-byte header; frames start right after and
        // the first video's 10-frame prefix is 80 bytes
        CHECK(src.substr(20, 80) == out.substr(20, 80));
    }

    REQUIRE(run("evaluate --data " + (dir / "s1/completions.fdmv") + " --ref " + data + " --out " +
                (dir / "e1")) == 0);
    CHECK(fs::exists(dir / "e1/metrics.csv"));
    CHECK(fs::exists(dir / "e1/speed_hist.csv"));
    CHECK(fs::exists(dir / "e1/speed_hist.svg"));

    SECTION("ground truth against itself scores WD 0 and OP 0") {
        REQUIRE(run("evaluate --data " + data + " --ref " + data + " --out " + (dir / "e2")) == 0);
        std::string metrics = slurp(dir / "e2/metrics.csv");
        CHECK(metrics.find("outlier_pct,0\n") != std::string::npos);
        CHECK(metrics.find("wasserstein,0\n") != std::string::npos);
    }

    SECTION("optimize-scheme emits a valid scheme json and trace") {
        REQUIRE(run("optimize-scheme --model " + (dir / "m1") + " --data " + data +
                    " --latents autoreg --n-obs 10 --videos 2 --t-grid-size 2 --seed 6 --out " +
                    (dir / "o1")) == 0);
        CHECK(fs::exists(dir / "o1/scheme.json"));
        std::string trace = slurp(dir / "o1/trace.csv");
        CHECK(trace.rfind("stage,step,candidate,loss,chosen", 0) == 0);
        // the optimized scheme is accepted by sample
        REQUIRE(run("sample --out " + (dir / "s3") + " --model " + (dir / "m1") + " --data " +
                    data + " --scheme " + (dir / "o1/scheme.json") +
                    " --n-obs 10 --count 1 --seed 7") == 0);
    }
}

TEST_CASE("inspect-scheme renders rows and reports violations") {
    TempDir dir;
    REQUIRE(run("inspect-scheme autoreg --n 30 --n-obs 10 --k 7 --out " + (dir / "i1")) == 0);
    std::string svg = slurp(dir / "i1/scheme.svg");
    // seven stages -> seven rows of 30 cells
    std::size_t rects = 0, pos = 0;
    while ((pos = svg.find("<rect", pos)) != std::string::npos) {
        ++rects;
        pos += 5;
    }
    CHECK(rects == 210);
    CHECK(slurp(dir / "i1/validation.txt").find("violations=0") != std::string::npos);

    SECTION("an invalid scheme file reports violations and exits 2") {
        std::string bad = dir / "bad.json";
        std::ofstream os(bad);
        os << R"({"N":30,"K":7,"n_obs":10,"stages":[{"X":[10,11],"Y":[29]}]})";
        os.close();
        CHECK(run("inspect-scheme " + bad + " --out " + (dir / "i2")) == 2);
        CHECK(slurp(dir / "i2/validation.txt").find("before it is sampled") != std::string::npos);
    }
}

TEST_CASE("inspect-taskdist writes svg and histogram") {
    TempDir dir;
    REQUIRE(run("inspect-taskdist --dist structured --n 30 --k 10 --seed 8 --samples 5"
                " --hist-draws 200 --out " +
                (dir / "t1")) == 0);
    CHECK(slurp(dir / "t1/tasks.svg").find("<svg") != std::string::npos);
    CHECK(slurp(dir / "t1/task_hist.csv").rfind("n_latent,n_observed,count", 0) == 0);

    SECTION("reruns are byte-identical") {
        REQUIRE(run("inspect-taskdist --dist structured --n 30 --k 10 --seed 8 --samples 5"
                    " --hist-draws 200 --out " +
                    (dir / "t2")) == 0);
        CHECK(slurp(dir / "t1/tasks.svg") == slurp(dir / "t2/tasks.svg"));
        CHECK(slurp(dir / "t1/task_hist.csv") == slurp(dir / "t2/task_hist.csv"));
    }
}

TEST_CASE("config file supplies defaults, flags win") {
    TempDir dir;
    std::string cfg = dir / "gen.cfg";
    {
        std::ofstream os(cfg);
        os << "count=4\nn=40\nseed=11\n";
    }
    std::string out1 = dir / "c1.fdmv";
    REQUIRE(run("gen-data town-drive --config " + cfg + " --out " + out1) == 0);
    std::string snap = slurp(out1 + ".config");
    CHECK(snap.find("count=4") != std::string::npos);

    // the flag overrides the file
    std::string out2 = dir / "c2.fdmv";
    REQUIRE(run("gen-data town-drive --config " + cfg + " --count 2 --out " + out2) == 0);
    CHECK(slurp(out2 + ".config").find("count=2") != std::string::npos);
}
