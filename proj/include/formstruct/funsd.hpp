#pragma once

#include <string>

#include "formstruct/document.hpp"

namespace formstruct {

// Loads the public FUNSD layout: <split>/annotations/<page>.json plus
// <split>/images/<page>.png. Accepts the distribution's directory aliases
// (training_data/testing_data, optionally under dataset/). Each entity
// becomes a Fragment; each linking pair [a,b] becomes an edge a->b.
// Self-links and duplicate links are dropped and recorded in Dataset::notes.
Dataset load_funsd(const std::string& root_dir, const std::string& split, bool with_images = true);

}  // namespace formstruct
