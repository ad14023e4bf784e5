#include "recsearch/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "recsearch/errors.hpp"
#include "recsearch/rng.hpp"

namespace recsearch {

ItemCatalog::ItemCatalog(std::vector<Item> items) : items_(std::move(items)) {
    build_index();
}

void ItemCatalog::build_index() {
    if (items_.empty()) throw ParseError("catalog is empty");
    normalized_.reserve(items_.size());
    normalized_no_year_.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (items_[i].item_id != static_cast<int>(i)) {
            throw ParseError("catalog item_id " + std::to_string(items_[i].item_id) +
                             " does not match position " + std::to_string(i));
        }
        std::string norm = normalize_title(items_[i].title);
        if (norm.empty()) {
            throw ParseError("catalog title at position " + std::to_string(i) +
                             " normalizes to an empty string");
        }
        auto [it, inserted] = index_.emplace(norm, static_cast<int>(i));
        if (!inserted) {
            throw ParseError("duplicate normalized title '" + norm + "' (items " +
                             std::to_string(it->second) + " and " + std::to_string(i) + ")");
        }
        normalized_.push_back(std::move(norm));
        normalized_no_year_.push_back(
            std::string(normalize_title(strip_trailing_year(items_[i].title))));
    }
}

ItemCatalog ItemCatalog::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open catalog file: " + path);
    std::vector<Item> items;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("catalog line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            Item item;
            item.item_id = j.at("item_id").get<int>();
            item.title = j.at("title").get<std::string>();
            const auto& attrs = j.at("attributes");
            for (AttributeKind kind : kAllAttributeKinds) {
                item.values(kind) =
                    attrs.at(std::string(attribute_kind_name(kind)))
                        .get<std::vector<std::string>>();
            }
            items.push_back(std::move(item));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("catalog line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return ItemCatalog(std::move(items));
}

const Item& ItemCatalog::at(int item_id) const {
    if (item_id < 0 || static_cast<std::size_t>(item_id) >= items_.size()) {
        throw ValidationError("item id out of range: " + std::to_string(item_id));
    }
    return items_[static_cast<std::size_t>(item_id)];
}

std::optional<int> ItemCatalog::lookup_normalized(std::string_view title) const {
    auto it = index_.find(normalize_title(title));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const std::string& ItemCatalog::normalized_title(int item_id) const {
    at(item_id);
    return normalized_[static_cast<std::size_t>(item_id)];
}

const std::string& ItemCatalog::normalized_title_no_year(int item_id) const {
    at(item_id);
    return normalized_no_year_[static_cast<std::size_t>(item_id)];
}

double indel_similarity(std::string_view a, std::string_view b) {
    const std::size_t m = a.size();
    const std::size_t n = b.size();
    if (m + n == 0) return 1.0;
    if (m == 0 || n == 0) return 0.0;
    // Two-row LCS table.
    std::vector<std::size_t> prev(n + 1, 0), cur(n + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            if (a[i - 1] == b[j - 1]) {
                cur[j] = prev[j - 1] + 1;
            } else {
                cur[j] = std::max(prev[j], cur[j - 1]);
            }
        }
        std::swap(prev, cur);
    }
    const std::size_t lcs = prev[n];
    return 2.0 * static_cast<double>(lcs) / static_cast<double>(m + n);
}

std::string_view strip_trailing_year(std::string_view title) {
    if (title.size() < 7 || title.back() != ')') return title;
    const std::size_t open = title.rfind(" (");
    if (open == std::string_view::npos) return title;
    const std::string_view inside = title.substr(open + 2, title.size() - open - 3);
    if (inside.size() != 4) return title;
    for (char c : inside) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return title;
    }
    return title.substr(0, open);
}

namespace {

// Cheap upper bound on indel similarity given only the lengths; lets the
// scan skip the quadratic LCS for hopeless candidates.
double length_bound(std::size_t m, std::size_t n) {
    if (m + n == 0) return 1.0;
    return 2.0 * static_cast<double>(std::min(m, n)) / static_cast<double>(m + n);
}

}  // namespace

MatchResult fuzzy_match(std::string_view raw, const ItemCatalog& catalog,
                        double threshold) {
    const std::string norm = normalize_title(raw);
    if (norm.empty()) {
        throw ValidationError("fuzzy_match: input is empty after trimming");
    }

    double best = -1.0;
    int best_id = -1;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        const int id = static_cast<int>(i);
        const std::string& full = catalog.normalized_title(id);
        const std::string& no_year = catalog.normalized_title_no_year(id);
        double sim = -1.0;
        if (length_bound(norm.size(), full.size()) > best) {
            sim = indel_similarity(norm, full);
        }
        if (&no_year != &full && no_year != full &&
            length_bound(norm.size(), no_year.size()) > std::max(best, sim)) {
            sim = std::max(sim, indel_similarity(norm, no_year));
        }
        if (sim > best) {
            best = sim;
            best_id = id;
        }
    }

    MatchResult result;
    result.raw_text = std::string(raw);
    result.similarity = std::max(best, 0.0);
    if (best_id >= 0 && best >= threshold) result.item_id = best_id;
    return result;
}

std::vector<int> sample_negatives(const ItemCatalog& catalog,
                                  const std::unordered_set<int>& exclude,
                                  std::size_t count, std::uint64_t seed) {
    std::vector<int> pool;
    pool.reserve(catalog.size());
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        const int id = static_cast<int>(i);
        if (!exclude.contains(id)) pool.push_back(id);
    }
    if (pool.size() < count) {
        throw ValidationError("sample_negatives: need " + std::to_string(count) +
                              " ids but only " + std::to_string(pool.size()) +
                              " remain after exclusion");
    }
    SplitMix64 rng(seed);
    // Partial Fisher-Yates: only the first `count` positions are needed.
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.bounded(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

}  // namespace recsearch
