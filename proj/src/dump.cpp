#include "formstruct/dump.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "formstruct/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace formstruct {

namespace {
constexpr int kFormatVersion = 1;
}

std::string crop_cache_dir_for(const std::string& dump_path) {
    fs::path p(dump_path);
    p.replace_extension();
    return p.string() + ".crops";
}

void save_dataset_dump(const Dataset& ds, const std::string& path, bool with_crops) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create dataset dump: " + path);
    for (const Page& page : ds.pages) {
        json doc;
        doc["format_version"] = kFormatVersion;
        doc["page_id"] = page.page_id;
        doc["split"] = ds.split_name;
        doc["width"] = page.width;
        doc["height"] = page.height;
        json frs = json::array();
        for (const Fragment& f : page.fragments) {
            json jf;
            jf["id"] = f.id;
            jf["text"] = f.text;
            if (!f.label.empty()) jf["label"] = f.label;
            json verts = json::array();
            for (const Point& v : f.vertices) verts.push_back(json::array({v.x, v.y}));
            jf["vertices"] = verts;
            frs.push_back(std::move(jf));
        }
        doc["fragments"] = std::move(frs);
        json edges = json::array();
        for (const HierarchyEdge& e : page.edges) edges.push_back(json::array({e.parent_id, e.child_id}));
        doc["edges"] = std::move(edges);
        out << doc.dump() << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
    out.close();
    if (with_crops) save_crop_cache(ds, crop_cache_dir_for(path));
}

Dataset load_dataset_dump(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset dump: " + path);
    Dataset ds;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
        }
        try {
            const int version = doc.at("format_version").get<int>();
            if (version != kFormatVersion)
                throw ParseError(path + ":" + std::to_string(line_no) + ": unsupported format_version " +
                                 std::to_string(version));
            Page page;
            page.page_id = doc.at("page_id").get<std::string>();
            if (line_no == 1 && doc.contains("split")) ds.split_name = doc["split"].get<std::string>();
            page.width = doc.at("width").get<int>();
            page.height = doc.at("height").get<int>();
            for (const auto& jf : doc.at("fragments")) {
                Fragment f;
                f.id = jf.at("id").get<int>();
                f.text = jf.at("text").get<std::string>();
                if (jf.contains("label")) f.label = jf["label"].get<std::string>();
                const auto& verts = jf.at("vertices");
                if (!verts.is_array() || verts.size() != 4)
                    throw ParseError("expected 4 vertices");
                for (size_t i = 0; i < 4; ++i)
                    f.vertices[i] = Point{verts[i][0].get<double>(), verts[i][1].get<double>()};
                page.fragments.push_back(std::move(f));
            }
            for (const auto& je : doc.at("edges"))
                page.edges.push_back(HierarchyEdge{je[0].get<int>(), je[1].get<int>()});
            validate_page(page);
            ds.pages.push_back(std::move(page));
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    validate_dataset(ds);
    const std::string crops = crop_cache_dir_for(path);
    if (fs::is_directory(crops)) load_crop_cache(ds, crops);
    return ds;
}

void save_crop_cache(const Dataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    json index;
    index["format_version"] = kFormatVersion;
    json entries = json::array();
    for (const Page& page : ds.pages) {
        fs::create_directories(fs::path(dir) / page.page_id);
        for (const Fragment& f : page.fragments) {
            if (!f.crop) continue;
            const std::string rel = page.page_id + "/" + std::to_string(f.id) + ".png";
            write_png(*f.crop, (fs::path(dir) / rel).string());
            entries.push_back(json{{"page", page.page_id},
                                   {"fragment", f.id},
                                   {"file", rel},
                                   {"width", f.crop->width},
                                   {"height", f.crop->height}});
        }
    }
    index["entries"] = std::move(entries);
    std::ofstream out(fs::path(dir) / "index.json", std::ios::trunc);
    if (!out) throw IoError("cannot create crop cache index in " + dir);
    out << index.dump(2) << "\n";
}

void load_crop_cache(Dataset& ds, const std::string& dir) {
    std::ifstream in(fs::path(dir) / "index.json");
    if (!in) throw IoError("crop cache index not found in " + dir);
    json index;
    try {
        in >> index;
    } catch (const json::exception& e) {
        throw ParseError(dir + "/index.json: " + e.what());
    }
    if (index.value("format_version", -1) != kFormatVersion)
        throw ParseError(dir + "/index.json: unsupported format_version");
    for (const auto& entry : index.at("entries")) {
        const std::string page_id = entry.at("page").get<std::string>();
        const int frag_id = entry.at("fragment").get<int>();
        const std::string rel = entry.at("file").get<std::string>();
        for (Page& page : ds.pages) {
            if (page.page_id != page_id) continue;
            for (Fragment& f : page.fragments) {
                if (f.id != frag_id) continue;
                f.crop = read_png((fs::path(dir) / rel).string());
            }
        }
    }
}

}  // namespace formstruct
