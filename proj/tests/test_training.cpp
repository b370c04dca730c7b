#include <doctest.h>

#include "formstruct/errors.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <fstream>
#include <set>

#include "formstruct/checkpoint.hpp"
#include "formstruct/synthetic.hpp"
#include "formstruct/training.hpp"

using namespace formstruct;
namespace fs = std::filesystem;

namespace {

Page three_fragment_page() {
    Page p;
    p.page_id = "p";
    p.width = 100;
    p.height = 100;
    for (int i = 0; i < 3; ++i) {
        Fragment f;
        f.id = i;
        const double y = 10.0 * i;
        f.vertices = {Point{0, y}, Point{10, y}, Point{10, y + 5}, Point{0, y + 5}};
        f.text = std::string(1, static_cast<char>('a' + i));
        p.fragments.push_back(f);
    }
    p.edges = {{0, 1}};
    return p;
}

// Tiny text+layout model for trainer tests (no visual to keep them fast).
ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.use_visual = false;
    cfg.fusion = FusionStrategy::concat_all;
    cfg.semantic.dim = 12;
    cfg.semantic.hash_buckets = 64;
    cfg.semantic.embed_dim = 8;
    cfg.semantic.hidden = 6;
    cfg.layout_dim = 6;
    return cfg;
}

SynthConfig tiny_synth() {
    SynthConfig cfg;
    cfg.pages = 6;
    cfg.keys_per_page = 3;
    cfg.values_per_key = 2;
    cfg.duplicate_key_prob = 0.3;
    return cfg;
}

}  // namespace

TEST_CASE("sample_negatives: exhaustion uses every eligible candidate") {
    Page p = three_fragment_page();
    Rng rng(1);
    NegativeSampleSet set = sample_negatives(p.edges[0], p, 5, rng);
    CHECK(set.child_id == 1);
    CHECK(set.positive_parent_id == 0);
    REQUIRE(set.negative_parent_ids.size() == 1);
    CHECK(set.negative_parent_ids[0] == 2);
}

TEST_CASE("sample_negatives: excludes the child and every gold parent") {
    Page p;
    p.page_id = "p";
    p.width = p.height = 100;
    for (int i = 0; i < 12; ++i) {
        Fragment f;
        f.id = i;
        f.vertices = {Point{0, 0}, Point{5, 0}, Point{5, 5}, Point{0, 5}};
        p.fragments.push_back(f);
    }
    p.edges = {{0, 7}, {3, 7}};  // child 7 has two gold parents
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        NegativeSampleSet set = sample_negatives(p.edges[0], p, 5, rng);
        CHECK(set.negative_parent_ids.size() == 5);
        std::set<int> uniq(set.negative_parent_ids.begin(), set.negative_parent_ids.end());
        CHECK(uniq.size() == 5);  // without replacement
        CHECK(!uniq.count(7));
        CHECK(!uniq.count(0));
        CHECK(!uniq.count(3));
    }
}

TEST_CASE("sample_negatives: deterministic under a fixed seed") {
    Page p = three_fragment_page();
    for (int i = 3; i < 10; ++i) {
        Fragment f;
        f.id = i;
        f.vertices = {Point{0, 0}, Point{5, 0}, Point{5, 5}, Point{0, 5}};
        p.fragments.push_back(f);
    }
    Rng a(42), b(42);
    for (int trial = 0; trial < 20; ++trial) {
        CHECK(sample_negatives(p.edges[0], p, 4, a).negative_parent_ids ==
              sample_negatives(p.edges[0], p, 4, b).negative_parent_ids);
    }
}

TEST_CASE("edge_loss: uniform scores give ln(K+1)") {
    for (int k : {1, 5, 10}) {
        std::vector<double> negs(static_cast<size_t>(k), 0.7);
        CHECK(edge_loss_value(0.7, negs) ==
              doctest::Approx(std::log(static_cast<double>(k) + 1.0)).epsilon(1e-12));
    }
}

TEST_CASE("edge_loss: saturates to zero when the positive dominates") {
    CHECK(edge_loss_value(200.0, {0.0, 1.0}) < 1e-12);
    // And stays finite/stable for extreme magnitudes.
    CHECK(std::isfinite(edge_loss_value(1e4, {-1e4, 1e4 - 1.0})));
}

TEST_CASE("edge_loss: closed-form spot value ln(1+e^-1)") {
    CHECK(edge_loss_value(1.0, {0.0}) == doctest::Approx(0.31326168751822286).epsilon(1e-12));
}

TEST_CASE("edge_loss: empty negative set contributes zero loss") {
    CHECK(edge_loss_value(3.0, {}) == 0.0);
}

TEST_CASE("edge_loss: softmax monotonicity in both directions") {
    const double base = edge_loss_value(1.0, {0.5, -0.2});
    CHECK(edge_loss_value(1.2, {0.5, -0.2}) < base);   // raise positive -> lower loss
    CHECK(edge_loss_value(1.0, {0.3, -0.2}) < base);   // lower a negative -> lower loss
    CHECK(edge_loss_value(1.0, {0.8, -0.2}) > base);   // raise a negative -> higher loss
    CHECK(base > 0.0);
}

TEST_CASE("edge_loss: tape form matches the closed form and is differentiable") {
    Tape tape(true);
    Param pos("pos", Tensor::scalar(0.4));
    Param n1("n1", Tensor::scalar(-0.3));
    Param n2("n2", Tensor::scalar(0.9));
    Tape::Id loss = edge_loss(tape, tape.param(pos), {tape.param(n1), tape.param(n2)});
    CHECK(tape.val(loss)[0] == doctest::Approx(edge_loss_value(0.4, {-0.3, 0.9})).epsilon(1e-12));
    tape.backward(loss);
    CHECK(tape.grad_for(pos)->data[0] < 0.0);  // increasing the positive lowers loss
    CHECK(tape.grad_for(n1)->data[0] > 0.0);
}

TEST_CASE("one optimizer step on a single edge decreases that edge's loss") {
    ModelConfig mc = tiny_config();
    mc.freeze_semantic = true;  // frozen-encoder toy: only layout/M move
    DocModel model(mc, 5);
    Page page = three_fragment_page();
    PreparedCrops crops;
    TrainConfig tc;
    tc.learning_rate = 1e-4;
    tc.epochs = 1;
    tc.batch_edges = 1;
    tc.eval_every = 0;
    tc.seed = 3;

    auto loss_now = [&]() {
        Tape tape(true);
        auto feats = model.page_features(tape, page, crops);
        Tape::Id pos = model.scorer().score_pair(tape, feats[0], feats[1]);
        std::vector<Tape::Id> negs = {model.scorer().score_pair(tape, feats[2], feats[1])};
        return tape.val(edge_loss(tape, pos, negs))[0];
    };
    const double before = loss_now();
    Dataset ds;
    ds.pages = {page};
    Trainer trainer(model, tc);
    trainer.train(ds);
    const double after = loss_now();
    CHECK(after < before);
}

TEST_CASE("training: same seed twice gives identical loss curves") {
    Dataset data = generate_synthetic(tiny_synth(), 11);
    TrainConfig tc;
    tc.epochs = 3;
    tc.eval_every = 0;
    tc.seed = 7;
    tc.threads = 2;  // parallelism must not break determinism

    std::vector<double> curve_a, curve_b;
    {
        DocModel model(tiny_config(), 9);
        Trainer trainer(model, tc);
        for (const EpochLog& log : trainer.train(data)) curve_a.push_back(log.mean_edge_loss);
    }
    {
        DocModel model(tiny_config(), 9);
        Trainer trainer(model, tc);
        for (const EpochLog& log : trainer.train(data)) curve_b.push_back(log.mean_edge_loss);
    }
    REQUIRE(curve_a.size() == curve_b.size());
    for (size_t i = 0; i < curve_a.size(); ++i) CHECK(curve_a[i] == curve_b[i]);
    CHECK(curve_a.front() > curve_a.back());  // it actually learns something
}

TEST_CASE("training: zero epochs leaves the model at initialization") {
    DocModel model(tiny_config(), 13);
    DocModel reference(tiny_config(), 13);
    Dataset data = generate_synthetic(tiny_synth(), 11);
    TrainConfig tc;
    tc.epochs = 0;
    Trainer trainer(model, tc);
    CHECK(trainer.train(data).empty());
    for (size_t i = 0; i < model.params().size(); ++i)
        CHECK(model.params()[i]->value.data == reference.params()[i]->value.data);
}

TEST_CASE("training: negative sets sampled during a run never contain gold parents") {
    Dataset data = generate_synthetic(tiny_synth(), 17);
    Rng rng(5);
    for (const Page& page : data.pages) {
        for (const HierarchyEdge& e : page.edges) {
            NegativeSampleSet set = sample_negatives(e, page, 10, rng);
            auto golds = page.parents_of(e.child_id);
            for (int n : set.negative_parent_ids) {
                CHECK(n != e.child_id);
                CHECK(std::find(golds.begin(), golds.end(), n) == golds.end());
            }
        }
    }
}

TEST_CASE("checkpoint: save -> load -> save is byte-identical") {
    DocModel model(tiny_config(), 21);
    fs::path dir = fs::temp_directory_path() / "formstruct_ck";
    fs::create_directories(dir);
    const std::string p1 = (dir / "a.fsck").string();
    const std::string p2 = (dir / "b.fsck").string();
    TrainConfig tc;
    save_checkpoint(model, &tc, p1);
    auto loaded = load_checkpoint(p1);
    for (size_t i = 0; i < model.params().size(); ++i) {
        CHECK(loaded->params()[i]->name == model.params()[i]->name);
        // float32 payload round trip: values equal after one save/load cycle.
        for (int64_t n = 0; n < model.params()[i]->value.numel(); ++n)
            CHECK(static_cast<float>(loaded->params()[i]->value[n]) ==
                  static_cast<float>(model.params()[i]->value[n]));
    }
    save_checkpoint(*loaded, &tc, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint: wrong d^S config fails naming the tensor") {
    DocModel model(tiny_config(), 22);
    fs::path dir = fs::temp_directory_path() / "formstruct_ck2";
    fs::create_directories(dir);
    const std::string path = (dir / "m.fsck").string();
    save_checkpoint(model, nullptr, path);
    ModelConfig other = tiny_config();
    other.semantic.dim = 16;  // different d^S
    DocModel wrong(other, 22);
    try {
        load_checkpoint_into(wrong, path);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("semantic.proj.w") != std::string::npos);
        CHECK(std::string(e.what()).find("shape mismatch") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("checkpoint: truncated file fails integrity, no partial load") {
    DocModel model(tiny_config(), 23);
    fs::path dir = fs::temp_directory_path() / "formstruct_ck3";
    fs::create_directories(dir);
    const std::string path = (dir / "m.fsck").string();
    save_checkpoint(model, nullptr, path);
    const auto full = fs::file_size(path);
    fs::resize_file(path, full - 37);
    DocModel target(tiny_config(), 24);
    const std::vector<double> before = target.params()[0]->value.data;
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
    // In-place load throws as well; corruption is detected before completion.
    CHECK_THROWS_AS(load_checkpoint_into(target, path), IoError);
    fs::remove_all(dir);
}

TEST_CASE("checkpoint: version mismatch is an explicit migration error") {
    fs::path dir = fs::temp_directory_path() / "formstruct_ck4";
    fs::create_directories(dir);
    const std::string path = (dir / "m.fsck").string();
    {
        DocModel model(tiny_config(), 25);
        save_checkpoint(model, nullptr, path);
    }
    // Bump the stored version field (bytes 4..7).
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(4);
    const char v2[4] = {2, 0, 0, 0};
    f.write(v2, 4);
    f.close();
    try {
        load_checkpoint(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("training: divergence aborts naming the page") {
    DocModel model(tiny_config(), 26);
    // Poison the relation matrix so every score goes non-finite.
    model.scorer().matrix().value[0] = std::numeric_limits<double>::quiet_NaN();
    Dataset data = generate_synthetic(tiny_synth(), 11);
    TrainConfig tc;
    tc.epochs = 1;
    Trainer trainer(model, tc);
    CHECK_THROWS_AS(trainer.train(data), TrainingError);
}

TEST_CASE("trainer restores the best-validation parameters") {
    Dataset train = generate_synthetic(tiny_synth(), 31);
    Dataset valid = generate_synthetic(tiny_synth(), 32);
    DocModel model(tiny_config(), 33);
    TrainConfig tc;
    tc.epochs = 4;
    tc.eval_every = 1;
    tc.seed = 5;
    Trainer trainer(model, tc);
    auto logs = trainer.train(train, &valid);
    REQUIRE(logs.size() == 4);
    double best = -1.0;
    for (const auto& log : logs) best = std::max(best, log.val_hit1);
    CHECK(best >= 0.0);
    CHECK(model.epochs_completed == 4);
}
