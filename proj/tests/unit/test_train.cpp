#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "odor/core/seed.hpp"
#include "odor/nn/inference.hpp"
#include "odor/train/cv.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace odor;
using namespace odor::train;
namespace fs = std::filesystem;

namespace {

Tensor<double> param(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor<double>::from({n}, std::move(v), true);
}

void set_grad(Tensor<double>& p, std::vector<double> g) {
    auto dst = p.mutable_grad();
    std::copy(g.begin(), g.end(), dst.begin());
}

bool same_curves(const std::vector<EpochRecord>& a, const std::vector<EpochRecord>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].lr != b[i].lr || a[i].train_loss != b[i].train_loss || a[i].val_loss != b[i].val_loss ||
            a[i].val_accuracy != b[i].val_accuracy)
            return false;
    return true;
}

}  // namespace

TEST_CASE("adamw update rule") {
    SUBCASE("single step from w = 1, g = 1") {
        auto w = param({1.0});
        AdamW<double> opt({w}, {.lr = 5e-4, .weight_decay = 1e-4});
        set_grad(w, {1.0});
        REQUIRE(opt.step() == StepStatus::applied);
        const double expected = 1.0 - 5e-4 * 1.0 / (1.0 + 1e-8) - 5e-4 * 1e-4 * 1.0;
        CHECK(w.data()[0] == doctest::Approx(expected).epsilon(1e-15));
        CHECK(std::abs(w.data()[0] - 0.99949995) < 1e-9);
        CHECK(opt.steps() == 1);
    }
    SUBCASE("zero gradient without decay leaves weights unchanged") {
        auto w = param({0.3, -2.0});
        AdamW<double> opt({w}, {.weight_decay = 0.0});
        set_grad(w, {0.0, 0.0});
        opt.step();
        CHECK(w.data()[0] == 0.3);
        CHECK(w.data()[1] == -2.0);
    }
    SUBCASE("parameters do not interact") {
        auto a = param({1.0}), b = param({1.0}), solo = param({1.0});
        AdamW<double> pair({a, b}), single({solo});
        for (int i = 0; i < 20; ++i) {
            set_grad(a, {0.1 * i});
            set_grad(b, {-3.0});
            set_grad(solo, {0.1 * i});
            pair.step();
            single.step();
        }
        CHECK(a.data()[0] == solo.data()[0]);
        CHECK(b.data()[0] != a.data()[0]);
    }
    SUBCASE("non-finite gradient aborts the step") {
        auto w = param({1.0, 2.0});
        AdamW<double> opt({w});
        w.mutable_grad()[1] = std::numeric_limits<double>::quiet_NaN();
        CHECK(opt.step() == StepStatus::aborted_nonfinite);
        CHECK(opt.steps() == 0);
        CHECK(w.data()[0] == 1.0);
        CHECK(opt.first_moment(0)[0] == 0.0);
    }
    SUBCASE("moments stay well formed") {
        auto w = param({0.0, 0.0, 0.0});
        AdamW<double> opt({w});
        std::mt19937_64 rng(1);
        std::normal_distribution<double> g;
        for (int i = 0; i < 100; ++i) {
            set_grad(w, {g(rng), g(rng), g(rng)});
            opt.step();
        }
        for (double v : opt.second_moment(0)) CHECK(v >= 0.0);
        CHECK(opt.first_moment(0).size() == 3);
    }
    CHECK_THROWS_AS(AdamW<double>({param({1.0})}, {.beta1 = 1.0}), InvalidArgument);
}

TEST_CASE("adamw without decay matches an Adam reference over 1000 steps") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    auto w = param({normal(rng)});
    AdamW<double> opt({w}, {.lr = 1e-3, .weight_decay = 0.0});
    test::AdamReference ref{1e-3, 0.9, 0.999, 1e-8};
    double ref_w = w.data()[0];
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double g = normal(rng) * std::exp(normal(rng));
        set_grad(w, {g});
        opt.step();
        ref_w = ref.step(ref_w, g);
        worst = std::max(worst, std::abs(w.data()[0] - ref_w) / std::max(std::abs(ref_w), 1e-300));
    }
    MESSAGE("worst relative deviation " << worst);
    CHECK(worst <= 1e-12);
}

TEST_CASE("cosine warm restarts") {
    CHECK(lr_cosine_warm_restarts(0) == 5e-4);
    CHECK(lr_cosine_warm_restarts(5) == doctest::Approx(2.5e-4).epsilon(1e-12));
    CHECK(lr_cosine_warm_restarts(10) == 5e-4);
    CHECK(lr_cosine_warm_restarts(20) == doctest::Approx(2.5e-4).epsilon(1e-12));
    CHECK(lr_cosine_warm_restarts(30) == 5e-4);
    CHECK(lr_cosine_warm_restarts(70) == 5e-4);
    CHECK(lr_cosine_warm_restarts(9.999) < 1e-9);
    CHECK(lr_cosine_warm_restarts(3.7) == lr_cosine_warm_restarts(3.7));
    CHECK_THROWS_AS(lr_cosine_warm_restarts(-1), InvalidArgument);
}

TEST_CASE("one-cycle schedule") {
    CHECK(lr_one_cycle(0, 100) == doctest::Approx(2e-5).epsilon(1e-12));
    CHECK(lr_one_cycle(30, 100) == doctest::Approx(5e-4).epsilon(1e-12));
    CHECK(lr_one_cycle(99, 100) == doctest::Approx(5e-8).epsilon(1e-9));
    for (std::size_t total : {10u, 100u, 997u}) {
        double peak = 0.0;
        std::size_t peak_step = 0;
        for (std::size_t s = 0; s < total; ++s)
            if (lr_one_cycle(s, total) > peak) peak = lr_one_cycle(s, total), peak_step = s;
        for (std::size_t s = 1; s < total; ++s) {
            if (s <= peak_step) CHECK(lr_one_cycle(s, total) >= lr_one_cycle(s - 1, total));
            else CHECK(lr_one_cycle(s, total) <= lr_one_cycle(s - 1, total));
        }
        CHECK(peak <= 5e-4);
    }
    CHECK_THROWS_AS(lr_one_cycle(100, 100), InvalidArgument);
    CHECK(parse_schedule("cosine") == Schedule::cosine_warm_restarts);
    CHECK(parse_schedule(schedule_name(Schedule::one_cycle)) == Schedule::one_cycle);
}

TEST_CASE("early stopping") {
    SUBCASE("steady improvement never stops") {
        EarlyStopping es;
        for (double l : {1.0, 0.9, 0.8}) CHECK(es.update(l) == StopDecision::improved);
        CHECK(es.best_epoch() == 3);
    }
    SUBCASE("improvement below the minimum delta does not count") {
        EarlyStopping es;
        es.update(1.0);
        CHECK(es.update(0.9995) == StopDecision::wait);
        CHECK(es.best_loss() == 1.0);
        CHECK(es.update(0.998) == StopDecision::improved);
    }
    SUBCASE("stops after patience non-improvements") {
        EarlyStopping es({.patience = 15});
        es.update(1.0);
        for (int i = 0; i < 14; ++i) CHECK(es.update(1.0) == StopDecision::wait);
        CHECK(es.update(1.0) == StopDecision::stop);
        CHECK(es.epochs_since_improvement() == 15);
    }
    CHECK_THROWS_AS(EarlyStopping({.patience = 0}), InvalidArgument);
}

TEST_CASE("one optimizer step lowers the batch loss") {
    for (auto arch : {nn::Architecture::res_cnn, nn::Architecture::attention_cnn}) {
        int decreased = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            auto model = nn::build_model<double>(arch, derive_seed(seed, "one-step"));
            const auto set = test::shifted_spectra(16, 0.5, seed);
            std::vector<std::size_t> idx(set.size());
            std::iota(idx.begin(), idx.end(), 0);
            const auto x = nn::make_batch<double>(set, idx);
            const auto labels = nn::batch_labels(set, idx);
            auto loss_now = [&] {
                NoGradGuard<double> guard;
                nn::ForwardContext ctx{nn::Mode::train, nullptr, false};
                return cross_entropy(model.forward(x, ctx).logits, std::span<const int>(labels)).item();
            };
            const double before = loss_now();
            AdamW<double> opt(model.parameters());
            {
                Tape<double> tape;
                nn::ForwardContext ctx{nn::Mode::train, nullptr, false};
                tape.backward(cross_entropy(model.forward(x, ctx).logits, std::span<const int>(labels)));
            }
            opt.step();
            decreased += loss_now() < before;
        }
        MESSAGE(nn::architecture_name(arch) << ": " << decreased << "/10 seeds decreased");
        CHECK(decreased >= 9);
    }
}

TEST_CASE("a small separable set is fit perfectly") {
    const auto set = test::shifted_spectra(16, 1.0, 21);
    for (auto arch : {nn::Architecture::res_cnn, nn::Architecture::attention_cnn}) {
        auto model = nn::build_model<float>(arch, 5);
        TrainConfig config;
        config.max_epochs = 200;
        config.batch_size = 8;
        config.early_stop.patience = 1000;
        std::size_t reached = 0;
        const auto result = train_model<float>(model, set, set, config, [&](const EpochRecord& r, nn::Model<float>& m) {
            if (nn::predict(m, std::span<const SpectralFeatures>(set)).accuracy < 1.0) return true;
            reached = r.epoch;
            return false;
        });
        MESSAGE(nn::architecture_name(arch) << " reached 100% train accuracy at epoch " << reached);
        CHECK(reached >= 1);
        CHECK(reached <= 200);
        CHECK(result.curve.size() == reached);
    }
}

TEST_CASE("training is deterministic and early stopping ends flat runs") {
    const auto train_set = test::shifted_spectra(40, 0.5, 3);
    const auto val_set = test::shifted_spectra(10, 0.5, 4);
    TrainConfig config;
    config.max_epochs = 4;
    config.seed = 17;
    auto run = [&] {
        auto model = nn::build_res_cnn<float>(2);
        return train_model<float>(model, train_set, val_set, config);
    };
    const auto a = run(), b = run();
    CHECK(same_curves(a.curve, b.curve));
    CHECK(a.curve.size() == 4);
    CHECK(a.best_epoch >= 1);
    CHECK(encode_checkpoint(a.best) == encode_checkpoint(b.best));

    config.seed = 18;
    auto model = nn::build_res_cnn<float>(2);
    CHECK_FALSE(same_curves(a.curve, train_model<float>(model, train_set, val_set, config).curve));

    SUBCASE("flat loss") {
        auto flat = test::shifted_spectra(20, 0.0, 5);
        for (auto& s : flat) std::fill(s.values.begin(), s.values.end(), 0.25);
        TrainConfig c;
        c.max_epochs = 100;
        c.early_stop.patience = 5;
        auto m = nn::build_res_cnn<float>(6);
        const auto r = train_model<float>(m, flat, flat, c);
        CHECK(r.stopped_early);
        CHECK(r.curve.size() < 100);
        CHECK(r.curve.size() == r.best_epoch + 5);
    }
}

TEST_CASE("best checkpoint is restored into the model") {
    const auto train_set = test::shifted_spectra(24, 0.5, 8);
    const auto val_set = test::shifted_spectra(8, 0.5, 9);
    auto model = nn::build_attention_cnn<float>(4);
    TrainConfig config;
    config.max_epochs = 6;
    config.schedule = Schedule::one_cycle;
    const auto r = train_model<float>(model, train_set, val_set, config);
    const auto val = nn::predict(model, std::span<const SpectralFeatures>(val_set), 64);
    CHECK(val.mean_loss == doctest::Approx(r.best_val_loss).epsilon(1e-12));
    CHECK(r.curve[r.best_epoch - 1].val_loss == r.best_val_loss);
}

TEST_CASE("training rejects bad inputs and reports divergence") {
    const auto set = test::shifted_spectra(8, 0.5, 1);
    auto model = nn::build_res_cnn<float>(1);
    TrainConfig config;
    config.batch_size = 1;
    CHECK_THROWS_AS(train_model<float>(model, set, set, config), InvalidArgument);
    config.batch_size = 4;
    CHECK_THROWS_AS(train_model<float>(model, set, std::span<const SpectralFeatures>(), config), InvalidArgument);

    auto bad = set;
    for (auto& v : bad[3].values) v = 3e38;
    CHECK_THROWS_AS(train_model<float>(model, bad, set, config), TrainingDiverged);
}

TEST_CASE("curve csv") {
    const auto path = fs::temp_directory_path() / "odor-test-curve.csv";
    write_curve_csv(path, std::vector<EpochRecord>{{1, 5e-4, 0.7, 0.6, 0.5, 0.75}});
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "epoch,lr,train_loss,val_loss,val_acc");
    CHECK(row == "1,0.0005,0.7,0.5,0.75");
    fs::remove(path);
}

TEST_CASE("cross-validation driver") {
    const auto spectra = test::shifted_spectra(60, 1.0, 12);
    CvConfig config;
    config.train.max_epochs = 3;
    config.train.batch_size = 16;
    config.seed = 99;

    const auto report = run_cross_validation(spectra, config);
    REQUIRE(report.folds.size() == 5);
    CHECK(report.complete);
    REQUIRE(report.summaries.size() == 1);
    CHECK(report.summaries[0].name == "ResCNN");
    CHECK(report.summaries[0].folds.size() == 5);
    std::size_t tested = 0;
    for (const auto& f : report.folds) {
        CHECK(f.audit.test_ids_disjoint);
        CHECK(f.audit.scaler_from_train_only);
        CHECK(f.audit.train + f.audit.validation + f.audit.test == 60);
        tested += f.members[0].report.trials.size();
        const auto& m = f.members[0].report.metrics;
        CHECK(m.confusion.total() == f.audit.test);
    }
    CHECK(tested == 60);
    CHECK(report.pooled_predictions().size() == 60);

    SUBCASE("reproducible and independent of the job count") {
        auto parallel = config;
        parallel.jobs = 3;
        const auto again = run_cross_validation(spectra, parallel);
        for (auto id : eval::kAllMetrics) {
            CHECK(again.summaries[0][id].mean == report.summaries[0][id].mean);
            CHECK(again.summaries[0][id].sd == report.summaries[0][id].sd);
        }
    }
    SUBCASE("ensemble mode fuses both members per fold") {
        auto ens = config;
        ens.ensemble = true;
        const auto r = run_cross_validation(spectra, ens);
        REQUIRE(r.summaries.size() == 3);
        CHECK(r.summaries[1].name == "AttentionCNN");
        CHECK(r.summaries[2].name == "Ensemble");
        for (const auto& f : r.folds) {
            REQUIRE(f.ensemble.has_value());
            for (std::size_t i = 0; i < f.ensemble->trials.size(); ++i) {
                const double expected = (f.members[0].probs[i][1] + f.members[1].probs[i][1]) / 2.0;
                CHECK(f.ensemble->trials[i].p_odor == expected);
            }
        }
        const auto dir = fs::temp_directory_path() / "odor-test-cv";
        fs::remove_all(dir);
        write_cv_outputs(dir, r);
        for (const char* name : {"table.txt", "report.json", "calibration.csv", "confidence_histogram.csv",
                                 "fold1/res_cnn.ckpt", "fold5/ensemble_predictions.csv", "fold3/attention_cnn_curve.csv"})
            CHECK(fs::exists(dir / name));
        fs::remove_all(dir);
    }
    SUBCASE("a failing fold is recorded, not thrown") {
        auto broken = spectra;
        for (auto& v : broken[7].values) v = 3e38;
        const auto r = run_cross_validation(broken, config);
        CHECK_FALSE(r.complete);
        std::size_t failed = 0;
        for (const auto& f : r.folds)
            if (!f.complete) {
                ++failed;
                CHECK_FALSE(f.error.empty());
            }
        CHECK(failed >= 1);
        CHECK(r.summaries[0].folds.size() == 5 - failed);
    }
    CHECK_THROWS_AS(run_cross_validation(test::shifted_spectra(6, 1.0, 1), config), InvalidArgument);
}
