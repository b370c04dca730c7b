#include "formstruct/document.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "formstruct/errors.hpp"

namespace formstruct {

RectClosure compute_rect_closure(const std::array<Point, 4>& vertices) {
    for (const Point& p : vertices) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw ValidationError("non-finite vertex coordinate");
    }
    RectClosure rc;
    rc.x_min = rc.x_max = vertices[0].x;
    rc.y_min = rc.y_max = vertices[0].y;
    for (const Point& p : vertices) {
        rc.x_min = std::min(rc.x_min, p.x);
        rc.x_max = std::max(rc.x_max, p.x);
        rc.y_min = std::min(rc.y_min, p.y);
        rc.y_max = std::max(rc.y_max, p.y);
    }
    // Degenerate-box repair: expand one pixel on a zero-extent axis.
    if (rc.x_max <= rc.x_min) rc.x_max = rc.x_min + 1.0;
    if (rc.y_max <= rc.y_min) rc.y_max = rc.y_min + 1.0;
    return rc;
}

RectClosure Fragment::closure() const {
    try {
        return compute_rect_closure(vertices);
    } catch (const ValidationError&) {
        throw ValidationError("fragment " + std::to_string(id) + ": non-finite vertex coordinate");
    }
}

std::array<double, 8> normalize_coordinates(const Fragment& frag, int page_width, int page_height) {
    if (page_width <= 0 || page_height <= 0)
        throw ValidationError("normalize_coordinates: page has zero dimension");
    RectClosure rc = frag.closure();
    std::array<double, 8> c = rc.corners_clockwise();
    for (size_t i = 0; i < 8; i += 2) {
        c[i] = std::clamp(c[i] / page_width, 0.0, 1.0);
        c[i + 1] = std::clamp(c[i + 1] / page_height, 0.0, 1.0);
    }
    return c;
}

const Fragment* Page::find_fragment(int id) const {
    for (const Fragment& f : fragments)
        if (f.id == id) return &f;
    return nullptr;
}

std::vector<int> Page::parents_of(int child_id) const {
    std::vector<int> out;
    for (const HierarchyEdge& e : edges)
        if (e.child_id == child_id) out.push_back(e.parent_id);
    return out;
}

size_t Dataset::fragment_count() const {
    size_t n = 0;
    for (const Page& p : pages) n += p.fragments.size();
    return n;
}

size_t Dataset::edge_count() const {
    size_t n = 0;
    for (const Page& p : pages) n += p.edges.size();
    return n;
}

const Page* Dataset::find_page(const std::string& page_id) const {
    for (const Page& p : pages)
        if (p.page_id == page_id) return &p;
    return nullptr;
}

void validate_page(const Page& page) {
    std::unordered_set<int> ids;
    for (const Fragment& f : page.fragments) {
        if (!ids.insert(f.id).second)
            throw ValidationError("page " + page.page_id + ": duplicate fragment id " + std::to_string(f.id));
        for (const Point& p : f.vertices) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y))
                throw ValidationError("page " + page.page_id + ": fragment " + std::to_string(f.id) +
                                      " has a non-finite coordinate");
            if (p.x < 0.0 || p.y < 0.0)
                throw ValidationError("page " + page.page_id + ": fragment " + std::to_string(f.id) +
                                      " has a negative coordinate");
        }
    }
    std::set<std::pair<int, int>> seen;
    for (const HierarchyEdge& e : page.edges) {
        if (e.parent_id == e.child_id)
            throw ValidationError("page " + page.page_id + ": self-edge on fragment " +
                                  std::to_string(e.parent_id));
        if (!ids.count(e.parent_id) || !ids.count(e.child_id))
            throw ValidationError("page " + page.page_id + ": edge " + std::to_string(e.parent_id) +
                                  "->" + std::to_string(e.child_id) + " references a missing fragment");
        if (!seen.insert({e.parent_id, e.child_id}).second)
            throw ValidationError("page " + page.page_id + ": duplicate edge " +
                                  std::to_string(e.parent_id) + "->" + std::to_string(e.child_id));
    }
}

void validate_dataset(const Dataset& ds) {
    std::unordered_set<std::string> ids;
    for (const Page& p : ds.pages) {
        if (!ids.insert(p.page_id).second)
            throw ValidationError("duplicate page_id '" + p.page_id + "' in split " + ds.split_name);
        validate_page(p);
    }
}

}  // namespace formstruct
