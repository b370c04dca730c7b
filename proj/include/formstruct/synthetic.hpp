#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "formstruct/document.hpp"

namespace formstruct {

// Desk-scale form generator: key fragments act as column/row headers with
// their value fragments beneath or beside them; gold edges run key -> value.
// Duplicated key texts force reliance on layout, bold key rendering injects
// a visual-only cue.
struct SynthConfig {
    int pages = 20;
    int keys_per_page = 4;
    int values_per_key = 3;
    double duplicate_key_prob = 0.5;
    double bold_superior_prob = 1.0;
    int canvas_width = 800;
    int canvas_height = 600;
    int jitter_px = 3;
    std::vector<std::string> key_lexicon;  // defaults to default_key_lexicon()
    std::string glyphs;                    // allowed characters, defaults to font coverage
    std::string split_name = "synthetic";

    void validate() const;
    std::string to_json() const;
    static SynthConfig from_json(const std::string& text);
};

std::vector<std::string> default_key_lexicon();

// Pure function of (config, seed): identical calls produce byte-identical
// datasets, including rendered crops.
Dataset generate_synthetic(const SynthConfig& config, uint64_t seed);

// 5x7 bitmap font used by the renderer; exposed for tests.
// Returns 7 row masks (bit 4 = leftmost column) or nullptr for unknown chars.
const uint8_t* glyph_rows(char c);

// Draws `text` with its top-left glyph corner at (x, y), `scale` device
// pixels per font pixel. Bold doubles the stroke width horizontally.
void draw_text(Image& img, const std::string& text, int x, int y, int scale, bool bold);

// Width in device pixels that draw_text covers.
int text_width(const std::string& text, int scale);

}  // namespace formstruct
