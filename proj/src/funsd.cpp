#include "formstruct/funsd.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "formstruct/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace formstruct {

namespace {

fs::path resolve_split_dir(const fs::path& root, const std::string& split) {
    std::vector<std::string> names;
    if (split == "train")
        names = {"train", "training_data"};
    else if (split == "test")
        names = {"test", "testing_data"};
    else
        throw ValidationError("unknown FUNSD split '" + split + "' (expected train or test)");
    for (const auto& n : names) {
        if (fs::is_directory(root / n)) return root / n;
        if (fs::is_directory(root / "dataset" / n)) return root / "dataset" / n;
    }
    throw IoError("FUNSD split directory not found under " + root.string() + " for split " + split);
}

json require_field(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key))
        throw ParseError(where + ": missing field '" + key + "'");
    return obj.at(key);
}

Fragment parse_entity(const json& ent, const std::string& where) {
    Fragment f;
    try {
        f.id = require_field(ent, "id", where).get<int>();
        f.text = require_field(ent, "text", where).get<std::string>();
        auto box = require_field(ent, "box", where);
        if (!box.is_array() || box.size() != 4)
            throw ParseError(where + ".box: expected [x0,y0,x1,y1]");
        double x0 = box[0].get<double>(), y0 = box[1].get<double>();
        double x1 = box[2].get<double>(), y1 = box[3].get<double>();
        if (x1 < x0) std::swap(x0, x1);
        if (y1 < y0) std::swap(y0, y1);
        x0 = std::max(0.0, x0);
        y0 = std::max(0.0, y0);
        f.vertices = {Point{x0, y0}, Point{x1, y0}, Point{x1, y1}, Point{x0, y1}};
        if (ent.contains("label")) f.label = ent["label"].get<std::string>();
        // word-level boxes ("words") are intentionally ignored
    } catch (const json::exception& e) {
        throw ParseError(where + ": " + e.what());
    }
    return f;
}

Image cut_crop(const Image& page_img, const RectClosure& rc) {
    int x0 = std::clamp(static_cast<int>(std::floor(rc.x_min)), 0, page_img.width - 1);
    int y0 = std::clamp(static_cast<int>(std::floor(rc.y_min)), 0, page_img.height - 1);
    int x1 = std::clamp(static_cast<int>(std::ceil(rc.x_max)), x0 + 1, page_img.width);
    int y1 = std::clamp(static_cast<int>(std::ceil(rc.y_max)), y0 + 1, page_img.height);
    return crop_rect(page_img, x0, y0, x1 - x0, y1 - y0);
}

}  // namespace

Dataset load_funsd(const std::string& root_dir, const std::string& split, bool with_images) {
    fs::path split_dir = resolve_split_dir(root_dir, split);
    fs::path ann_dir = split_dir / "annotations";
    fs::path img_dir = split_dir / "images";
    if (!fs::is_directory(ann_dir))
        throw IoError("annotations directory not found: " + ann_dir.string());

    std::vector<fs::path> ann_files;
    for (const auto& entry : fs::directory_iterator(ann_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            ann_files.push_back(entry.path());
    std::sort(ann_files.begin(), ann_files.end());
    if (ann_files.empty())
        throw IoError("no annotation files found in " + ann_dir.string());

    Dataset ds;
    ds.split_name = split;
    size_t dropped_self = 0, dropped_dup = 0;

    for (const auto& ann_path : ann_files) {
        const std::string page_id = ann_path.stem().string();
        Page page;
        page.page_id = page_id;

        std::ifstream in(ann_path);
        if (!in) throw IoError("cannot open annotation: " + ann_path.string());
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw ParseError(ann_path.string() + ": invalid JSON: " + e.what());
        }
        if (!doc.contains("form") || !doc["form"].is_array())
            throw ParseError(ann_path.string() + ": missing top-level 'form' array");

        size_t idx = 0;
        for (const auto& ent : doc["form"]) {
            page.fragments.push_back(
                parse_entity(ent, ann_path.string() + ":form[" + std::to_string(idx) + "]"));
            ++idx;
        }

        std::set<std::pair<int, int>> seen;
        idx = 0;
        for (const auto& ent : doc["form"]) {
            if (!ent.contains("linking")) { ++idx; continue; }
            for (const auto& link : ent["linking"]) {
                if (!link.is_array() || link.size() != 2)
                    throw ParseError(ann_path.string() + ":form[" + std::to_string(idx) +
                                     "].linking: expected [from,to] pairs");
                int a = link[0].get<int>();
                int b = link[1].get<int>();
                if (a == b) { ++dropped_self; continue; }
                if (!seen.insert({a, b}).second) { ++dropped_dup; continue; }
                page.edges.push_back(HierarchyEdge{a, b});
            }
            ++idx;
        }

        if (with_images) {
            fs::path img_path = img_dir / (page_id + ".png");
            if (!fs::exists(img_path))
                throw IoError("missing image for page '" + page_id + "': " + img_path.string());
            page.image = read_png(img_path.string());
            page.width = page.image->width;
            page.height = page.image->height;
            for (Fragment& f : page.fragments) f.crop = cut_crop(*page.image, f.closure());
            page.image.reset();  // full-page raster not needed once crops are cut
        } else {
            // Without images the page extent comes from the annotation boxes.
            double w = 1.0, h = 1.0;
            for (const Fragment& f : page.fragments) {
                RectClosure rc = f.closure();
                w = std::max(w, rc.x_max);
                h = std::max(h, rc.y_max);
            }
            page.width = static_cast<int>(std::ceil(w));
            page.height = static_cast<int>(std::ceil(h));
        }

        validate_page(page);
        ds.pages.push_back(std::move(page));
    }

    if (dropped_self)
        ds.notes.push_back("dropped " + std::to_string(dropped_self) + " self-link(s)");
    if (dropped_dup)
        ds.notes.push_back("dropped " + std::to_string(dropped_dup) + " duplicate link(s)");
    validate_dataset(ds);
    return ds;
}

}  // namespace formstruct
