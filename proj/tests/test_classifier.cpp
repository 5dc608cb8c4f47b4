#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "airtopo/classifier.hpp"
#include "airtopo/phantom.hpp"
#include "oracles.hpp"

using namespace airtopo;
namespace fs = std::filesystem;

namespace {

IntensityProfile random_profile(Rng& rng) {
    IntensityProfile p;
    for (auto& s : p.samples) s = static_cast<float>(rng.uniform());
    return p;
}

std::array<double, 64> random_input(Rng& rng) {
    std::array<double, 64> x{};
    for (auto& v : x) v = rng.uniform();
    return x;
}

fs::path temp_file(const char* tag) {
    return fs::temp_directory_path() / (std::string("airtopo_") + tag + "_" + std::to_string(::getpid()) + ".bin");
}

} // namespace

TEST_CASE("the zero network is maximally uncertain") {
    ClassifierModel model; // zero weights
    IntensityProfile p;
    for (auto& s : p.samples) s = 0.5f;

    const Classification c = classify(model, p);
    CHECK(c.label == ClassLabel::true_airway); // tie-break by class order
    for (const double prob : c.probabilities)
        CHECK(prob == Catch::Approx(1.0 / 3.0).margin(1e-12));

    const auto logits = model.net.forward(p.samples.data());
    for (const float l : logits) CHECK(l == 0.0f);

    // purity
    const Classification c2 = classify(model, p);
    CHECK(c2.label == c.label);
    CHECK(c2.probabilities == c.probabilities);
}

TEST_CASE("softmax probabilities are positive and sum to one") {
    Rng rng(11);
    for (int rep = 0; rep < 200; ++rep) {
        const std::array<float, 3> logits{static_cast<float>(rng.uniform(-30.0, 30.0)),
                                          static_cast<float>(rng.uniform(-30.0, 30.0)),
                                          static_cast<float>(rng.uniform(-30.0, 30.0))};
        const auto p = softmax_probabilities(logits);
        double sum = 0.0;
        for (const double v : p) {
            REQUIRE(v > 0.0);
            sum += v;
        }
        REQUIRE(sum == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("label decisions are invariant under increasing logit transforms") {
    Rng rng(13);
    ClassifierModel model;
    he_init(model.net, rng);

    ClassifierModel scaled = model;
    for (auto& w : scaled.net.params()) w = 0.0f;
    // scale only the dense head: logits become 2x + 0.5 of the original
    const auto& blocks = Cnn1d<float>::blocks();
    for (std::size_t b = 0; b < 6; ++b)
        for (std::size_t i = 0; i < blocks[b].size; ++i)
            scaled.net.params()[blocks[b].offset + i] = model.net.params()[blocks[b].offset + i];
    for (std::size_t i = 0; i < blocks[6].size; ++i)
        scaled.net.params()[blocks[6].offset + i] = 2.0f * model.net.params()[blocks[6].offset + i];
    for (std::size_t i = 0; i < blocks[7].size; ++i)
        scaled.net.params()[blocks[7].offset + i] =
            2.0f * model.net.params()[blocks[7].offset + i] + 0.5f;

    for (int rep = 0; rep < 50; ++rep) {
        const IntensityProfile p = random_profile(rng);
        CHECK(classify(model, p).label == classify(scaled, p).label);
    }
}

TEST_CASE("analytic gradients match central finite differences in double precision") {
    Rng rng(2024);
    Rng coord_rng(77);
    std::size_t total_checked = 0, total_skipped = 0;
    double worst = 0.0;

    for (int draw = 0; draw < 8; ++draw) {
        Cnn1d<double> net;
        he_init(net, rng);
        const auto input = random_input(rng);
        const int label = static_cast<int>(rng.uniform_int(0, 2));

        // a spread of coordinates across every block
        std::vector<std::size_t> coords;
        for (const auto& blk : Cnn1d<double>::blocks())
            for (int k = 0; k < 8; ++k)
                coords.push_back(blk.offset + coord_rng.index(blk.size));

        const auto res = oracles::gradient_check(net, input, label, coords);
        total_checked += res.checked;
        total_skipped += res.skipped_kinks;
        worst = std::max(worst, res.max_rel_error);
    }
    INFO("checked=" << total_checked << " skipped=" << total_skipped << " worst=" << worst);
    REQUIRE(total_checked > 400);
    CHECK(worst < 1e-4);
    // pool-switch skips must stay rare or the check would be vacuous
    CHECK(static_cast<double>(total_skipped) <=
          0.1 * static_cast<double>(total_checked + total_skipped));
}

TEST_CASE("training memorizes a single mini-batch") {
    Rng rng(5);
    TrainingSet data;
    for (int i = 0; i < 8; ++i) {
        data.profiles.push_back(random_profile(rng));
        data.labels.push_back(static_cast<ClassLabel>(i % 3));
    }
    TrainHyper hyper;
    hyper.batch = 8;
    hyper.epochs = 500; // one batch per epoch -> 500 steps
    hyper.lr = 0.05;
    hyper.val_fraction = 0.0;
    hyper.seed = 9;
    const TrainResult r = train(data, hyper);
    REQUIRE(r.train_loss.size() == 500);
    CHECK(r.train_loss.back() < 0.01);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    PhantomSpec spec;
    spec.generations = 3;
    const Phantom ph = generate_phantom(spec);
    const TrainingSet data = synthesize_training_set(ph.gt_mask, ph.volume, 40, 21);

    TrainHyper hyper;
    hyper.epochs = 3;
    hyper.seed = 77;
    const TrainResult a = train(data, hyper);
    const TrainResult b = train(data, hyper);
    REQUIRE(a.model.net.params() == b.model.net.params());
    REQUIRE(a.train_loss == b.train_loss);
    REQUIRE(a.val_accuracy == b.val_accuracy);
}

TEST_CASE("training requires every class") {
    TrainingSet data;
    Rng rng(3);
    for (int i = 0; i < 6; ++i) {
        data.profiles.push_back(random_profile(rng));
        data.labels.push_back(ClassLabel::true_airway);
    }
    CHECK_THROWS_AS(train(data, TrainHyper{}), ContractError);
}

TEST_CASE("a short training run separates phantom-synthesized classes") {
    PhantomSpec spec;
    spec.generations = 4;
    const Phantom ph = generate_phantom(spec);
    const TrainingSet data = synthesize_training_set(ph.gt_mask, ph.volume, 200, 31);

    TrainHyper hyper;
    hyper.epochs = 30;
    hyper.seed = 1;
    hyper.val_fraction = 0.15;
    hyper.target_val_accuracy = 0.92;
    const TrainResult r = train(data, hyper);
    REQUIRE(!r.val_accuracy.empty());
    INFO("epochs_run=" << r.epochs_run << " final val acc=" << r.val_accuracy.back());
    CHECK(r.val_accuracy.back() >= 0.90);
}

TEST_CASE("model files round-trip bit-exactly") {
    Rng rng(41);
    ClassifierModel m;
    for (auto& w : m.net.params()) w = static_cast<float>(rng.normal(0.0, 0.3));
    m.hyper.lr = 0.005;
    m.hyper.batch = 16;
    m.hyper.epochs = 12;
    m.hyper.seed = 123456789ull;

    const auto path = temp_file("model");
    save_model(m, path.string());
    const ClassifierModel r = load_model(path.string());
    REQUIRE(r == m);

    // save(load(f)) reproduces the file bytes
    const auto path2 = temp_file("model2");
    save_model(r, path2.string());
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::vector<char> b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::vector<char> b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    REQUIRE(b1 == b2);
    fs::remove(path);
    fs::remove(path2);
}

TEST_CASE("model file corruption is reported") {
    ClassifierModel m;
    const auto path = temp_file("model_bad");
    save_model(m, path.string());

    SECTION("corrupted magic") {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS_MATCHES(load_model(path.string()), FormatError,
                             Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("magic")));
    }
    SECTION("future version") {
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(4);
        const std::uint32_t v = model_io::kVersion + 1;
        f.write(reinterpret_cast<const char*>(&v), 4);
        f.close();
        CHECK_THROWS_MATCHES(load_model(path.string()), FormatError,
                             Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("unsupported")));
    }
    SECTION("truncated file") {
        const auto size = fs::file_size(path);
        fs::resize_file(path, size - 100);
        CHECK_THROWS_AS(load_model(path.string()), FormatError);
    }
    fs::remove(path);
}
