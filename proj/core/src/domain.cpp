#include "recsearch/domain.hpp"

#include <cctype>
#include <cmath>
#include <unordered_set>

#include "recsearch/errors.hpp"

namespace recsearch {

std::string_view attribute_kind_name(AttributeKind kind) {
    switch (kind) {
        case AttributeKind::Genre: return "genre";
        case AttributeKind::Actor: return "actor";
        case AttributeKind::Writer: return "writer";
        case AttributeKind::Director: return "director";
    }
    throw ValidationError("unknown attribute kind");
}

AttributeKind attribute_kind_from_name(std::string_view name) {
    if (name == "genre") return AttributeKind::Genre;
    if (name == "actor") return AttributeKind::Actor;
    if (name == "writer") return AttributeKind::Writer;
    if (name == "director") return AttributeKind::Director;
    throw ParseError("unknown attribute kind: " + std::string(name));
}

std::string_view speaker_name(Speaker s) {
    return s == Speaker::Seeker ? "seeker" : "recommender";
}

Speaker speaker_from_name(std::string_view name) {
    if (name == "seeker") return Speaker::Seeker;
    if (name == "recommender") return Speaker::Recommender;
    throw ParseError("unknown speaker: " + std::string(name));
}

void SearchState::validate() const {
    std::unordered_set<int> seen;
    for (int id : items) {
        if (!seen.insert(id).second) {
            throw ValidationError("state " + std::to_string(state_id) +
                                  ": duplicate item id " + std::to_string(id));
        }
    }
    if (per_item_scores.has_value() != reward.has_value()) {
        throw ValidationError("state " + std::to_string(state_id) +
                              ": per_item_scores and reward must be set together");
    }
    if (per_item_scores) {
        if (per_item_scores->size() != items.size()) {
            throw ValidationError("state " + std::to_string(state_id) +
                                  ": score count does not match item count");
        }
        double sum = 0.0;
        for (double s : *per_item_scores) {
            if (s < 0.0 || s > 1.0) {
                throw ValidationError("state " + std::to_string(state_id) +
                                      ": per-item score outside [0, 1]");
            }
            sum += s;
        }
        const double mean =
            per_item_scores->empty() ? 0.0 : sum / static_cast<double>(per_item_scores->size());
        if (std::fabs(mean - *reward) > kRewardMeanTolerance) {
            throw ValidationError("state " + std::to_string(state_id) +
                                  ": reward is not the mean of per-item scores");
        }
    }
    const bool root_shaped = !parent_state_id && !critique_used;
    if ((depth == 0) != root_shaped) {
        throw ValidationError("state " + std::to_string(state_id) +
                              ": depth 0 must coincide with missing parent and critique");
    }
    if (depth < 0) {
        throw ValidationError("state " + std::to_string(state_id) + ": negative depth");
    }
}

std::string format_item_with_attributes(const Item& item,
                                        std::span<const AttributeKind> kinds) {
    std::string block;
    for (AttributeKind kind : kinds) {
        const auto& vals = item.values(kind);
        if (vals.empty()) continue;
        if (!block.empty()) block += "; ";
        block += attribute_kind_name(kind);
        block += ": ";
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (i > 0) block += ", ";
            block += vals[i];
        }
    }
    if (block.empty()) return item.title;
    return item.title + " (" + block + ")";
}

std::string format_item_with_attributes(const Item& item) {
    return format_item_with_attributes(
        item, std::span<const AttributeKind>(kAllAttributeKinds));
}

namespace {

// Punctuation stripped from the ends of a title candidate. Parentheses and
// brackets are deliberately absent: "(1995)" is part of the identity.
bool is_strippable_punct(unsigned char c) {
    switch (c) {
        case '"': case '\'': case '`': case '*': case '_': case '.': case ',':
        case '!': case '?': case ';': case ':': case '-': case '~': case '#':
            return true;
        default:
            return false;
    }
}

}  // namespace

std::string normalize_title(std::string_view raw) {
    std::size_t begin = 0;
    std::size_t end = raw.size();
    while (begin < end && (std::isspace(static_cast<unsigned char>(raw[begin])) ||
                           is_strippable_punct(static_cast<unsigned char>(raw[begin])))) {
        ++begin;
    }
    while (end > begin && (std::isspace(static_cast<unsigned char>(raw[end - 1])) ||
                           is_strippable_punct(static_cast<unsigned char>(raw[end - 1])))) {
        --end;
    }
    std::string out;
    out.reserve(end - begin);
    bool pending_space = false;
    for (std::size_t i = begin; i < end; ++i) {
        const unsigned char c = static_cast<unsigned char>(raw[i]);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(c));
    }
    return out;
}

}  // namespace recsearch
