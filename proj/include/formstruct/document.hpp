#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "formstruct/image.hpp"

namespace formstruct {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// Axis-aligned bounding box of a fragment's four vertices.
struct RectClosure {
    double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }

    // Flattened vertex list [x1,y1,...,x4,y4], clockwise from top-left.
    std::array<double, 8> corners_clockwise() const {
        return {x_min, y_min, x_max, y_min, x_max, y_max, x_min, y_max};
    }
};

// One OCR text fragment: content, quadrilateral location, optional crop.
struct Fragment {
    int id = -1;
    std::string text;
    std::array<Point, 4> vertices{};
    std::optional<Image> crop;  // grayscale cut of the rectangular closure
    std::string label;          // pass-through category tag, may be empty

    RectClosure closure() const;
};

// Directed hierarchy edge: parent (superior) -> child (inferior).
struct HierarchyEdge {
    int parent_id = -1;
    int child_id = -1;

    bool operator==(const HierarchyEdge&) const = default;
};

struct Page {
    std::string page_id;
    std::vector<Fragment> fragments;
    std::vector<HierarchyEdge> edges;
    std::optional<Image> image;
    int width = 0;
    int height = 0;

    const Fragment* find_fragment(int id) const;
    // Gold parent ids of `child_id`, in edge order.
    std::vector<int> parents_of(int child_id) const;
};

struct Dataset {
    std::vector<Page> pages;
    std::string split_name;
    std::vector<std::string> notes;  // loader warnings (dropped links etc.)

    size_t fragment_count() const;
    size_t edge_count() const;
    const Page* find_page(const std::string& page_id) const;
};

// Componentwise min/max box; degenerate axes are expanded by one pixel so
// crops and normalization stay well-defined.
RectClosure compute_rect_closure(const std::array<Point, 4>& vertices);

// Closure corner coordinates divided by page width/height; all entries in [0,1].
std::array<double, 8> normalize_coordinates(const Fragment& frag, int page_width, int page_height);

// Structural checks: unique fragment ids, resolvable edges, parent != child,
// no duplicate edges, finite non-negative coordinates. Throws ValidationError.
void validate_page(const Page& page);
void validate_dataset(const Dataset& ds);

}  // namespace formstruct
