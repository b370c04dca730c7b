#pragma once

#include <string>

#include "formstruct/document.hpp"

namespace formstruct {

// Canonical on-disk dataset: one JSON document per line mirroring the Page
// type, each carrying format_version: 1. Crops live in a sibling cache
// directory of lossless PNGs plus an index file (crop cache format
// version 1); save_dataset_dump writes it when with_crops is set, and
// load_dataset_dump attaches it when present.
void save_dataset_dump(const Dataset& ds, const std::string& path, bool with_crops = true);
Dataset load_dataset_dump(const std::string& path);

// Crop cache helpers (also used standalone for FUNSD re-crop avoidance).
void save_crop_cache(const Dataset& ds, const std::string& dir);
void load_crop_cache(Dataset& ds, const std::string& dir);

// Directory holding the crop cache for a dump file: "<path minus
// extension>.crops".
std::string crop_cache_dir_for(const std::string& dump_path);

}  // namespace formstruct
