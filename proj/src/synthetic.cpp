#include "formstruct/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "formstruct/errors.hpp"
#include "formstruct/rng.hpp"

namespace formstruct {

namespace {

struct Glyph {
    char c;
    uint8_t rows[7];
};

// 5x7 uppercase font, row-major, bit 4 = leftmost column.
constexpr Glyph kFont[] = {
    {'A', {0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
    {'B', {0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110}},
    {'C', {0b01111, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b01111}},
    {'D', {0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110}},
    {'E', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111}},
    {'F', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000}},
    {'G', {0b01111, 0b10000, 0b10000, 0b10011, 0b10001, 0b10001, 0b01111}},
    {'H', {0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
    {'I', {0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b11111}},
    {'J', {0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100}},
    {'K', {0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001}},
    {'L', {0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111}},
    {'M', {0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001}},
    {'N', {0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001, 0b10001}},
    {'O', {0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'P', {0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000}},
    {'Q', {0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101}},
    {'R', {0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001}},
    {'S', {0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110}},
    {'T', {0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100}},
    {'U', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'V', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100}},
    {'W', {0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b11011, 0b10001}},
    {'X', {0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b01010, 0b10001}},
    {'Y', {0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100}},
    {'Z', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111}},
    {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
    {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'2', {0b01110, 0b10001, 0b00001, 0b00110, 0b01000, 0b10000, 0b11111}},
    {'3', {0b11110, 0b00001, 0b00001, 0b01110, 0b00001, 0b00001, 0b11110}},
    {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
    {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
    {'6', {0b01110, 0b10000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
    {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
    {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
    {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00001, 0b01110}},
    {'-', {0b00000, 0b00000, 0b00000, 0b01110, 0b00000, 0b00000, 0b00000}},
    {':', {0b00000, 0b00100, 0b00000, 0b00000, 0b00100, 0b00000, 0b00000}},
    {'.', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00100}},
    {' ', {0, 0, 0, 0, 0, 0, 0}},
};

constexpr int kAdvance = 6;  // font columns per character including spacing
constexpr int kFontScale = 2;
constexpr int kPadX = 4;
constexpr int kPadY = 7;
constexpr int kGlyphH = 7 * kFontScale;
constexpr int kBoxH = kGlyphH + 2 * kPadY;
constexpr int kLineGap = 8;

}  // namespace

const uint8_t* glyph_rows(char c) {
    for (const Glyph& g : kFont)
        if (g.c == c) return g.rows;
    return nullptr;
}

int text_width(const std::string& text, int scale) {
    if (text.empty()) return 0;
    return (static_cast<int>(text.size()) * kAdvance - 1) * scale;
}

void draw_text(Image& img, const std::string& text, int x, int y, int scale, bool bold) {
    int cx = x;
    for (char c : text) {
        const uint8_t* rows = glyph_rows(c);
        if (rows) {
            for (int ry = 0; ry < 7; ++ry) {
                for (int rx = 0; rx < 5; ++rx) {
                    if (!(rows[ry] & (1 << (4 - rx)))) continue;
                    for (int sy = 0; sy < scale; ++sy) {
                        for (int sx = 0; sx < scale + (bold ? 1 : 0); ++sx) {
                            int px = cx + rx * scale + sx;
                            int py = y + ry * scale + sy;
                            if (px >= 0 && px < img.width && py >= 0 && py < img.height)
                                img.set(px, py, 0.0f);
                        }
                    }
                }
            }
        }
        cx += kAdvance * scale;
    }
}

std::vector<std::string> default_key_lexicon() {
    return {"NAME",  "DATE",  "TOTAL", "PHONE", "CITY",  "STATE", "EMAIL", "BRAND",
            "MODEL", "PRICE", "COUNT", "OWNER", "DEPT",  "TITLE", "GRADE", "BATCH"};
}

void SynthConfig::validate() const {
    if (pages <= 0) throw ValidationError("synthetic config: pages must be positive");
    if (keys_per_page <= 0 || values_per_key <= 0)
        throw ValidationError("synthetic config: zero keys or values");
    if (duplicate_key_prob < 0.0 || duplicate_key_prob > 1.0)
        throw ValidationError("synthetic config: duplicate_key_prob out of [0,1]");
    if (bold_superior_prob < 0.0 || bold_superior_prob > 1.0)
        throw ValidationError("synthetic config: bold_superior_prob out of [0,1]");
    if (canvas_width < 200 || canvas_height < 200)
        throw ValidationError("synthetic config: canvas must be at least 200x200");
    std::vector<std::string> lex = key_lexicon.empty() ? default_key_lexicon() : key_lexicon;
    if (static_cast<int>(lex.size()) < keys_per_page)
        throw ValidationError("synthetic config: key_lexicon needs at least keys_per_page entries");
    const std::string charset = glyphs.empty() ? std::string("ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 -:.") : glyphs;
    for (const auto& w : lex) {
        if (w.empty()) throw ValidationError("synthetic config: empty lexicon word");
        for (char c : w) {
            if (charset.find(c) == std::string::npos || glyph_rows(c) == nullptr)
                throw ValidationError("synthetic config: lexicon word '" + w +
                                      "' uses a character outside the glyph set");
        }
    }
}

std::string SynthConfig::to_json() const {
    nlohmann::json j{{"pages", pages},
                     {"keys_per_page", keys_per_page},
                     {"values_per_key", values_per_key},
                     {"duplicate_key_prob", duplicate_key_prob},
                     {"bold_superior_prob", bold_superior_prob},
                     {"canvas_width", canvas_width},
                     {"canvas_height", canvas_height},
                     {"jitter_px", jitter_px},
                     {"split_name", split_name}};
    if (!key_lexicon.empty()) j["key_lexicon"] = key_lexicon;
    if (!glyphs.empty()) j["glyphs"] = glyphs;
    return j.dump();
}

SynthConfig SynthConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("synthetic config: invalid JSON: ") + e.what());
    }
    SynthConfig c;
    try {
        c.pages = j.value("pages", c.pages);
        c.keys_per_page = j.value("keys_per_page", c.keys_per_page);
        c.values_per_key = j.value("values_per_key", c.values_per_key);
        c.duplicate_key_prob = j.value("duplicate_key_prob", c.duplicate_key_prob);
        c.bold_superior_prob = j.value("bold_superior_prob", c.bold_superior_prob);
        c.canvas_width = j.value("canvas_width", c.canvas_width);
        c.canvas_height = j.value("canvas_height", c.canvas_height);
        c.jitter_px = j.value("jitter_px", c.jitter_px);
        c.split_name = j.value("split_name", c.split_name);
        if (j.contains("key_lexicon")) c.key_lexicon = j["key_lexicon"].get<std::vector<std::string>>();
        if (j.contains("glyphs")) c.glyphs = j["glyphs"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synthetic config: ") + e.what());
    }
    return c;
}

Dataset generate_synthetic(const SynthConfig& config, uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const std::vector<std::string> lexicon =
        config.key_lexicon.empty() ? default_key_lexicon() : config.key_lexicon;

    Dataset ds;
    ds.split_name = config.split_name;

    const int grid_cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(config.keys_per_page))));
    const int grid_rows = (config.keys_per_page + grid_cols - 1) / grid_cols;
    const int cell_w = config.canvas_width / grid_cols;
    const int cell_h = config.canvas_height / grid_rows;

    for (int page_idx = 0; page_idx < config.pages; ++page_idx) {
        Page page;
        page.page_id = "synth-" + std::to_string(page_idx);
        page.width = config.canvas_width;
        page.height = config.canvas_height;
        Image canvas(config.canvas_width, config.canvas_height, 1.0f);

        // Pick key texts: fresh draws without replacement, then the duplicate
        // rule overwrites some with an earlier key's text.
        std::vector<std::string> pool = lexicon;
        rng.shuffle(pool);
        std::vector<std::string> key_texts(static_cast<size_t>(config.keys_per_page));
        for (int k = 0; k < config.keys_per_page; ++k) {
            if (k > 0 && rng.bernoulli(config.duplicate_key_prob))
                key_texts[static_cast<size_t>(k)] =
                    key_texts[static_cast<size_t>(rng.next_below(static_cast<uint64_t>(k)))];
            else
                key_texts[static_cast<size_t>(k)] = pool[static_cast<size_t>(k)];
        }

        int next_id = 0;
        auto jitter = [&]() {
            return static_cast<int>(rng.next_below(static_cast<uint64_t>(2 * config.jitter_px + 1))) -
                   config.jitter_px;
        };
        auto add_fragment = [&](const std::string& text, int x, int y, bool bold,
                                const std::string& label) {
            const int w = text_width(text, kFontScale) + 2 * kPadX;
            const int h = kBoxH;
            x = std::clamp(x, 0, config.canvas_width - w - 1);
            y = std::clamp(y, 0, config.canvas_height - h - 1);
            draw_text(canvas, text, x + kPadX, y + kPadY, kFontScale, bold);
            Fragment f;
            f.id = next_id++;
            f.text = text;
            f.label = label;
            double x0 = x, y0 = y, x1 = x + w, y1 = y + h;
            f.vertices = {Point{x0, y0}, Point{x1, y0}, Point{x1, y1}, Point{x0, y1}};
            page.fragments.push_back(std::move(f));
            return page.fragments.back().id;
        };

        // Groups land in distinct cells (collision-free) but at a random
        // origin inside the cell, so absolute positions never identify the
        // group structure by themselves.
        std::vector<int> cell_of(static_cast<size_t>(config.keys_per_page));
        for (int k = 0; k < config.keys_per_page; ++k) cell_of[static_cast<size_t>(k)] = k;
        rng.shuffle(cell_of);

        for (int k = 0; k < config.keys_per_page; ++k) {
            const int cell_x = (cell_of[static_cast<size_t>(k)] % grid_cols) * cell_w;
            const int cell_y = (cell_of[static_cast<size_t>(k)] / grid_cols) * cell_h;
            const std::string& key_text = key_texts[static_cast<size_t>(k)];
            const bool bold = rng.bernoulli(config.bold_superior_prob);

            std::vector<std::string> value_texts;
            for (int v = 0; v < config.values_per_key; ++v)
                value_texts.push_back(key_text + " " +
                                      std::to_string(rng.next_below(10)));

            auto box_w = [&](const std::string& t) { return text_width(t, kFontScale) + 2 * kPadX; };
            int col_w = box_w(key_text);
            for (const auto& vt : value_texts) col_w = std::max(col_w, box_w(vt));
            const int col_h = (config.values_per_key + 1) * kBoxH + config.values_per_key * kLineGap;
            int row_w = box_w(key_text);
            for (const auto& vt : value_texts) row_w += box_w(vt) + 10;

            const int margin = 6 + config.jitter_px;
            const bool row_fits = row_w + 2 * margin < cell_w && kBoxH + 2 * margin < cell_h;
            const bool row_mode = rng.bernoulli(0.3) && row_fits;
            const int group_w = row_mode ? row_w : col_w;
            const int group_h = row_mode ? kBoxH : col_h;

            auto place = [&](int cell_origin, int cell_extent, int extent) {
                const int lo = cell_origin + margin;
                const int hi = std::max(lo, cell_origin + cell_extent - extent - margin);
                return lo + static_cast<int>(rng.next_below(static_cast<uint64_t>(hi - lo + 1)));
            };
            const int kx = place(cell_x, cell_w, group_w);
            const int ky = place(cell_y, cell_h, group_h);
            const int key_id = add_fragment(key_text, kx + jitter(), ky + jitter(), bold, "question");

            int vx = kx, vy = ky;
            for (int v = 0; v < config.values_per_key; ++v) {
                const std::string& vt = value_texts[static_cast<size_t>(v)];
                if (row_mode)
                    vx += box_w(v == 0 ? key_text : value_texts[static_cast<size_t>(v - 1)]) + 10;
                else
                    vy += kBoxH + kLineGap;
                const int value_id =
                    add_fragment(vt, vx + jitter(), vy + jitter(), false, "answer");
                page.edges.push_back(HierarchyEdge{key_id, value_id});
            }
        }

        for (Fragment& f : page.fragments) {
            RectClosure rc = f.closure();
            int x0 = std::clamp(static_cast<int>(std::floor(rc.x_min)), 0, canvas.width - 1);
            int y0 = std::clamp(static_cast<int>(std::floor(rc.y_min)), 0, canvas.height - 1);
            int x1 = std::clamp(static_cast<int>(std::ceil(rc.x_max)), x0 + 1, canvas.width);
            int y1 = std::clamp(static_cast<int>(std::ceil(rc.y_max)), y0 + 1, canvas.height);
            f.crop = crop_rect(canvas, x0, y0, x1 - x0, y1 - y0);
        }

        validate_page(page);
        ds.pages.push_back(std::move(page));
    }
    return ds;
}

}  // namespace formstruct
