#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "vcx/datasets.hpp"
#include "vcx/target.hpp"

using namespace vcx;
using namespace vcx::testing;

TEST_CASE("prediction shapes and determinism") {
    ToyTargetConfig config;
    config.task = Task::Classification;
    config.classes = 4;
    config.channels = 3;
    ToyTarget clf(config, SeedSpec{51, "tgt-init"});
    RandomStream stream(SeedSpec{51, "tgt-data"});
    VideoTensor x = random_video(4, 16, 16, 3, stream);
    auto logits = clf.predict(x);
    CHECK(logits.size() == 4);
    CHECK(bitwise_equal(logits, clf.predict(x)));

    ToyTargetConfig rconfig;
    rconfig.task = Task::Regression;
    rconfig.channels = 1;
    ToyTarget reg(rconfig, SeedSpec{52, "tgt-init"});
    VideoTensor g = random_video(4, 16, 16, 1, stream);
    auto value = reg.predict(g);
    REQUIRE(value.size() == 1);
    CHECK(value[0] >= 0.0f);
    CHECK(value[0] <= 100.0f);
}

TEST_CASE("feature layers expose the documented shapes") {
    ToyTargetConfig config;
    config.task = Task::Classification;
    config.classes = 2;
    config.channels = 1;
    ToyTarget clf(config, SeedSpec{53, "tgt-init"});
    RandomStream stream(SeedSpec{53, "tgt-data"});
    VideoTensor x = random_video(3, 16, 16, 1, stream);

    LatentTensor c1 = clf.features(x, "conv1");
    CHECK(c1.frames == 3);
    CHECK(c1.height == 8);
    CHECK(c1.channels == static_cast<std::size_t>(config.conv1_c));
    LatentTensor c2 = clf.features(x, "conv2");
    CHECK(c2.height == 4);
    LatentTensor pool = clf.features(x, "frame_pool");
    CHECK(pool.frames == 3);
    CHECK(pool.height == 1);
    CHECK(pool.channels == static_cast<std::size_t>(config.conv2_c));
    LatentTensor embed = clf.features(x, "video_embed");
    CHECK(embed.frames == 1);
    CHECK_THROWS_AS(clf.features(x, "nope"), ConfigError);

    // video_embed is the temporal mean of frame_pool
    for (std::size_t c = 0; c < embed.channels; ++c) {
        double acc = 0.0;
        for (std::size_t f = 0; f < pool.frames; ++f) acc += pool.values[f * pool.channels + c];
        CHECK(embed.values[c] == doctest::Approx(acc / 3.0).epsilon(1e-5));
    }
}

TEST_CASE("input_pullback matches finite differences through the full model") {
    for (Task task : {Task::Classification, Task::Regression}) {
        ToyTargetConfig config;
        config.task = task;
        config.classes = 2;
        config.channels = 2;
        config.conv1_c = 6;
        config.conv2_c = 8;
        config.hidden = 10;
        ToyTarget model(config, SeedSpec{54, "tgt-init"});
        RandomStream stream(SeedSpec{54, "tgt-data"});
        VideoTensor x = random_video(2, 8, 8, 2, stream);
        std::vector<float> cot =
            random_vector(task == Task::Classification ? 2 : 1, stream);

        VideoTensor g = model.input_pullback(x, cot);
        // the regression head returns value_scale * sigmoid, so the float
        // rounding of the output needs a larger step to stay below tolerance
        const double step = task == Task::Regression ? 1e-2 : 1e-3;
        auto fd = finite_difference_grad(
            x.values,
            [&](const std::vector<float>& xv) {
                VideoTensor xx = x;
                xx.values = xv;
                auto out = model.predict(xx);
                double acc = 0.0;
                for (std::size_t i = 0; i < out.size(); ++i)
                    acc += static_cast<double>(out[i]) * cot[i];
                return acc;
            },
            step);
        CHECK(relative_error(g.values, fd) <= 1e-3);
    }
}

TEST_CASE("classifier reaches high accuracy on the moving-shape task") {
    DatasetConfig ds;
    ds.kind = DatasetKind::MovingShape;
    ds.train_count = 96;
    ds.val_count = 32;
    ds.test_count = 0;
    ds.height = 16;
    ds.width = 16;
    ds.max_radius = 5.0;
    ds.frames = 8;
    ds.shape_size = 5.0;
    ds.speed = 0.75;
    auto train = generate_split(ds, "train");
    auto val = generate_split(ds, "val");

    ToyTargetConfig config;
    config.task = Task::Classification;
    config.classes = 4;
    config.channels = 3;
    config.conv1_c = 8;
    config.conv2_c = 16;
    config.hidden = 32;
    ToyTarget clf(config, SeedSpec{55, "tgt-init"});
    TargetTrainConfig tc;
    tc.steps = 400;
    tc.batch = 8;
    tc.lr = 3e-3;
    tc.threads = 2;
    TrainStats stats = train_target(clf, train, val, tc);
    CHECK(stats.val_metric >= 0.9);
}

TEST_CASE("training is deterministic and lr=0 freezes parameters") {
    DatasetConfig ds;
    ds.kind = DatasetKind::Pulse;
    ds.train_count = 8;
    ds.val_count = 0;
    ds.test_count = 0;
    ds.height = 16;
    ds.width = 16;
    ds.max_radius = 5.0;
    ds.frames = 4;
    auto train = generate_split(ds, "train");

    ToyTargetConfig config;
    config.task = Task::Regression;
    config.channels = 1;
    config.conv1_c = 4;
    config.conv2_c = 8;
    config.hidden = 8;

    ToyTarget frozen(config, SeedSpec{56, "tgt-init"});
    const auto before = frozen.params().gather();
    TargetTrainConfig tc;
    tc.steps = 3;
    tc.batch = 4;
    tc.lr = 0.0;
    tc.threads = 1;
    train_target(frozen, train, {}, tc);
    CHECK(bitwise_equal(frozen.params().gather(), before));

    ToyTarget a(config, SeedSpec{56, "tgt-init"});
    ToyTarget b(config, SeedSpec{56, "tgt-init"});
    tc.lr = 2e-3;
    tc.steps = 30;
    tc.threads = 2;
    train_target(a, train, {}, tc);
    train_target(b, train, {}, tc);
    CHECK(bitwise_equal(a.params().gather(), b.params().gather()));
}

TEST_CASE("target checkpoints round-trip through disk") {
    ToyTargetConfig config;
    config.task = Task::Classification;
    config.classes = 3;
    config.channels = 3;
    ToyTarget model(config, SeedSpec{57, "tgt-init"});
    const auto dir = fresh_temp_dir("target_ckpt");
    const std::string path = (dir / "target.ldvt").string();
    save_target(model, path, 0.97);
    ToyTarget loaded = load_target(path);
    CHECK(bitwise_equal(model.params().gather(), loaded.params().gather()));
    CHECK(loaded.num_classes() == 3);
}
