#include <doctest.h>

#include "formstruct/errors.hpp"

#include <filesystem>
#include <fstream>

#include "formstruct/document.hpp"
#include "formstruct/dump.hpp"
#include "formstruct/funsd.hpp"
#include "formstruct/synthetic.hpp"

using namespace formstruct;
namespace fs = std::filesystem;

TEST_CASE("rect closure: axis-aligned identity") {
    RectClosure rc = compute_rect_closure({Point{0, 0}, Point{10, 0}, Point{10, 5}, Point{0, 5}});
    CHECK(rc.x_min == 0);
    CHECK(rc.y_min == 0);
    CHECK(rc.x_max == 10);
    CHECK(rc.y_max == 5);
}

TEST_CASE("rect closure: quadrilateral min/max") {
    RectClosure rc = compute_rect_closure({Point{2, 1}, Point{8, 3}, Point{6, 7}, Point{0, 5}});
    CHECK(rc.x_min == 0);
    CHECK(rc.y_min == 1);
    CHECK(rc.x_max == 8);
    CHECK(rc.y_max == 7);
}

TEST_CASE("rect closure: degenerate box expands one pixel") {
    RectClosure rc = compute_rect_closure({Point{3, 3}, Point{3, 3}, Point{3, 3}, Point{3, 3}});
    CHECK(rc.x_min == 3);
    CHECK(rc.y_min == 3);
    CHECK(rc.x_max == 4);
    CHECK(rc.y_max == 4);
    CHECK(rc.width() > 0);
    CHECK(rc.height() > 0);
}

TEST_CASE("rect closure is idempotent on its own output") {
    RectClosure rc = compute_rect_closure({Point{2, 1}, Point{8, 3}, Point{6, 7}, Point{0, 5}});
    auto c = rc.corners_clockwise();
    RectClosure rc2 = compute_rect_closure(
        {Point{c[0], c[1]}, Point{c[2], c[3]}, Point{c[4], c[5]}, Point{c[6], c[7]}});
    CHECK(rc2.x_min == rc.x_min);
    CHECK(rc2.y_min == rc.y_min);
    CHECK(rc2.x_max == rc.x_max);
    CHECK(rc2.y_max == rc.y_max);
}

TEST_CASE("rect closure rejects non-finite coordinates, naming the fragment") {
    Fragment f;
    f.id = 42;
    f.vertices = {Point{0, 0}, Point{1, 0}, Point{std::nan(""), 1}, Point{0, 1}};
    try {
        (void)f.closure();
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("42") != std::string::npos);
    }
}

TEST_CASE("normalize_coordinates maps the full page to the unit square") {
    Fragment f;
    f.id = 0;
    f.vertices = {Point{0, 0}, Point{640, 0}, Point{640, 480}, Point{0, 480}};
    auto c = normalize_coordinates(f, 640, 480);
    const std::array<double, 8> expect = {0, 0, 1, 0, 1, 1, 0, 1};
    for (size_t i = 0; i < 8; ++i) CHECK(c[i] == doctest::Approx(expect[i]));
}

TEST_CASE("normalize_coordinates: degenerate center point stays near 0.5") {
    Fragment f;
    f.id = 0;
    f.vertices = {Point{320, 240}, Point{320, 240}, Point{320, 240}, Point{320, 240}};
    auto c = normalize_coordinates(f, 640, 480);
    for (size_t i = 0; i < 8; ++i) CHECK(c[i] == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("normalize_coordinates rejects zero page dimensions") {
    Fragment f;
    f.vertices = {Point{0, 0}, Point{1, 0}, Point{1, 1}, Point{0, 1}};
    CHECK_THROWS_AS(normalize_coordinates(f, 0, 100), ValidationError);
}

TEST_CASE("normalize_coordinates stays in [0,1]^8 on synthetic pages") {
    SynthConfig cfg;
    cfg.pages = 3;
    Dataset ds = generate_synthetic(cfg, 99);
    for (const Page& p : ds.pages)
        for (const Fragment& f : p.fragments) {
            auto c = normalize_coordinates(f, p.width, p.height);
            for (double v : c) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
        }
}

TEST_CASE("synthetic generator: counts forced by construction") {
    SynthConfig cfg;
    cfg.pages = 1;
    cfg.keys_per_page = 2;
    cfg.values_per_key = 2;
    Dataset ds = generate_synthetic(cfg, 1);
    REQUIRE(ds.pages.size() == 1);
    CHECK(ds.pages[0].fragments.size() == 6);
    CHECK(ds.pages[0].edges.size() == 4);
    for (const Fragment& f : ds.pages[0].fragments) {
        REQUIRE(f.crop.has_value());
        CHECK(f.crop->width > 0);
        CHECK(f.crop->height > 0);
    }
}

TEST_CASE("synthetic generator is a pure function of (config, seed)") {
    SynthConfig cfg;
    cfg.pages = 4;
    Dataset a = generate_synthetic(cfg, 1234);
    Dataset b = generate_synthetic(cfg, 1234);
    REQUIRE(a.pages.size() == b.pages.size());
    for (size_t i = 0; i < a.pages.size(); ++i) {
        const Page& pa = a.pages[i];
        const Page& pb = b.pages[i];
        REQUIRE(pa.fragments.size() == pb.fragments.size());
        CHECK(pa.edges.size() == pb.edges.size());
        for (size_t j = 0; j < pa.fragments.size(); ++j) {
            CHECK(pa.fragments[j].text == pb.fragments[j].text);
            CHECK(pa.fragments[j].vertices[0].x == pb.fragments[j].vertices[0].x);
            REQUIRE(pa.fragments[j].crop.has_value());
            CHECK(pa.fragments[j].crop->px == pb.fragments[j].crop->px);
        }
    }
    Dataset c = generate_synthetic(cfg, 1235);
    bool any_diff = false;
    for (size_t j = 0; j < a.pages[0].fragments.size(); ++j)
        if (a.pages[0].fragments[j].text != c.pages[0].fragments[j].text) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("synthetic generator: duplicate_prob=1 makes all key texts identical") {
    SynthConfig cfg;
    cfg.pages = 1;
    cfg.keys_per_page = 3;
    cfg.duplicate_key_prob = 1.0;
    Dataset ds = generate_synthetic(cfg, 7);
    std::string key_text;
    int keys = 0;
    for (const Fragment& f : ds.pages[0].fragments) {
        if (f.label != "question") continue;
        ++keys;
        if (key_text.empty())
            key_text = f.text;
        else
            CHECK(f.text == key_text);
    }
    CHECK(keys == 3);
}

TEST_CASE("synthetic generator rejects zero keys or values") {
    SynthConfig cfg;
    cfg.keys_per_page = 0;
    CHECK_THROWS_AS(generate_synthetic(cfg, 1), ValidationError);
    cfg.keys_per_page = 2;
    cfg.values_per_key = 0;
    CHECK_THROWS_AS(generate_synthetic(cfg, 1), ValidationError);
    SynthConfig bad;
    bad.pages = 0;
    CHECK_THROWS_AS(generate_synthetic(bad, 1), ValidationError);
}

TEST_CASE("synthetic edges resolve and parent != child; bold glyphs differ") {
    SynthConfig cfg;
    cfg.pages = 2;
    cfg.bold_superior_prob = 1.0;
    Dataset ds = generate_synthetic(cfg, 21);
    validate_dataset(ds);  // throws on any structural violation
    // A bold key crop must not equal a non-bold rendering of the same text.
    SynthConfig thin = cfg;
    thin.bold_superior_prob = 0.0;
    Dataset ds2 = generate_synthetic(thin, 21);
    const Fragment& bold_key = ds.pages[0].fragments[0];
    const Fragment& thin_key = ds2.pages[0].fragments[0];
    REQUIRE(bold_key.text == thin_key.text);
    CHECK(bold_key.crop->px != thin_key.crop->px);
}

namespace {

// Minimal FUNSD-format fixture: two annotated pages with images.
fs::path make_funsd_fixture() {
    fs::path root = fs::temp_directory_path() / "formstruct_funsd_fixture";
    fs::remove_all(root);
    fs::create_directories(root / "train" / "annotations");
    fs::create_directories(root / "train" / "images");
    fs::create_directories(root / "test" / "annotations");
    fs::create_directories(root / "test" / "images");

    auto write_page = [&](const fs::path& split, const std::string& name, const std::string& body) {
        std::ofstream(split / "annotations" / (name + ".json")) << body;
        Image img(200, 100, 1.0f);
        for (int x = 20; x < 60; ++x)
            for (int y = 10; y < 20; ++y) img.set(x, y, 0.0f);
        write_png(img, (split / "images" / (name + ".png")).string());
    };

    // linking appears on both endpoints (as in the real data) plus a
    // self-link; both must be dropped/deduplicated.
    const std::string page1 = R"({"form":[
      {"id":0,"text":"NAME:","box":[20,10,60,20],"label":"question",
       "linking":[[0,1]],"words":[{"text":"NAME:","box":[20,10,60,20]}]},
      {"id":1,"text":"Morris Corp","box":[70,10,140,20],"label":"answer","linking":[[0,1],[2,2]]},
      {"id":2,"text":"","box":[20,40,60,50],"label":"other","linking":[]}
    ]})";
    const std::string page2 = R"({"form":[
      {"id":0,"text":"DATE","box":[10,10,40,18],"label":"question","linking":[[0,1]]},
      {"id":1,"text":"1989","box":[50,10,80,18],"label":"answer","linking":[[0,1]]}
    ]})";
    write_page(root / "train", "page1", page1);
    write_page(root / "train", "page2", page2);
    write_page(root / "test", "tpage", page2);
    return root;
}

}  // namespace

TEST_CASE("funsd loader: pages, fragments, links, crops") {
    fs::path root = make_funsd_fixture();
    Dataset train = load_funsd(root.string(), "train");
    CHECK(train.pages.size() == 2);
    CHECK(train.fragment_count() == 5);
    CHECK(train.edge_count() == 2);  // duplicates and the self-link dropped
    const Page* p1 = train.find_page("page1");
    REQUIRE(p1 != nullptr);
    CHECK(p1->width == 200);
    CHECK(p1->height == 100);
    REQUIRE(p1->fragments[0].crop.has_value());
    CHECK(p1->fragments[0].crop->width == 40);
    CHECK(p1->fragments[0].crop->height == 10);
    // Empty-text fragments are kept.
    CHECK(p1->fragments[2].text.empty());
    CHECK(!train.notes.empty());

    Dataset test = load_funsd(root.string(), "test");
    CHECK(test.pages.size() == 1);
    fs::remove_all(root);
}

TEST_CASE("funsd loader error paths") {
    fs::path root = make_funsd_fixture();

    SUBCASE("missing image names the page") {
        fs::remove(root / "train" / "images" / "page2.png");
        try {
            load_funsd(root.string(), "train");
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("page2") != std::string::npos);
        }
    }
    SUBCASE("malformed annotation reports file and field") {
        std::ofstream(root / "train" / "annotations" / "page1.json")
            << R"({"form":[{"id":0,"text":"X","box":[1,2,3],"linking":[]}]})";
        try {
            load_funsd(root.string(), "train");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("page1.json") != std::string::npos);
            CHECK(msg.find("box") != std::string::npos);
        }
    }
    SUBCASE("empty annotation directory") {
        fs::remove_all(root / "train" / "annotations");
        fs::create_directories(root / "train" / "annotations");
        try {
            load_funsd(root.string(), "train");
            FAIL("expected IoError");
        } catch (const IoError& e) {
            CHECK(std::string(e.what()).find("no annotation files found") != std::string::npos);
        }
    }
    SUBCASE("unknown split") { CHECK_THROWS_AS(load_funsd(root.string(), "dev"), ValidationError); }
    fs::remove_all(root);
}

TEST_CASE("funsd loader accepts the distribution's directory names") {
    fs::path root = make_funsd_fixture();
    fs::rename(root / "train", root / "training_data");
    Dataset train = load_funsd(root.string(), "train");
    CHECK(train.pages.size() == 2);
    fs::remove_all(root);
}

TEST_CASE("canonical dump round trip with crop cache") {
    SynthConfig cfg;
    cfg.pages = 2;
    Dataset ds = generate_synthetic(cfg, 5);
    ds.split_name = "train";
    fs::path dir = fs::temp_directory_path() / "formstruct_dump_rt";
    fs::remove_all(dir);
    const std::string path = (dir / "train.jsonl").string();
    save_dataset_dump(ds, path, true);
    CHECK(fs::exists(crop_cache_dir_for(path) + "/index.json"));

    Dataset back = load_dataset_dump(path);
    REQUIRE(back.pages.size() == ds.pages.size());
    CHECK(back.split_name == "train");
    for (size_t i = 0; i < ds.pages.size(); ++i) {
        CHECK(back.pages[i].page_id == ds.pages[i].page_id);
        REQUIRE(back.pages[i].fragments.size() == ds.pages[i].fragments.size());
        CHECK(back.pages[i].edges.size() == ds.pages[i].edges.size());
        for (size_t j = 0; j < ds.pages[i].fragments.size(); ++j) {
            CHECK(back.pages[i].fragments[j].text == ds.pages[i].fragments[j].text);
            REQUIRE(back.pages[i].fragments[j].crop.has_value());
            CHECK(back.pages[i].fragments[j].crop->px == ds.pages[i].fragments[j].crop->px);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("dump loader rejects bad format versions") {
    fs::path dir = fs::temp_directory_path() / "formstruct_dump_bad";
    fs::create_directories(dir);
    const std::string path = (dir / "bad.jsonl").string();
    std::ofstream(path) << R"({"format_version":9,"page_id":"x","width":10,"height":10,"fragments":[],"edges":[]})"
                        << "\n";
    CHECK_THROWS_AS(load_dataset_dump(path), ParseError);
    fs::remove_all(dir);
}

TEST_CASE("page validation catches structural violations") {
    Page p;
    p.page_id = "p";
    Fragment a;
    a.id = 0;
    a.vertices = {Point{0, 0}, Point{1, 0}, Point{1, 1}, Point{0, 1}};
    Fragment b = a;
    b.id = 1;
    p.fragments = {a, b};
    p.edges = {{0, 1}};
    validate_page(p);
    SUBCASE("duplicate fragment id") {
        p.fragments.push_back(a);
        CHECK_THROWS_AS(validate_page(p), ValidationError);
    }
    SUBCASE("self edge") {
        p.edges.push_back({1, 1});
        CHECK_THROWS_AS(validate_page(p), ValidationError);
    }
    SUBCASE("dangling edge") {
        p.edges.push_back({0, 9});
        CHECK_THROWS_AS(validate_page(p), ValidationError);
    }
    SUBCASE("duplicate edge") {
        p.edges.push_back({0, 1});
        CHECK_THROWS_AS(validate_page(p), ValidationError);
    }
}
