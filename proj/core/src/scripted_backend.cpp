#include "recsearch/scripted_backend.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "recsearch/errors.hpp"
#include "recsearch/prompts.hpp"
#include "recsearch/rng.hpp"

namespace recsearch {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(pos));
            break;
        }
        lines.emplace_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

// Whole-word containment of `needle` in `haystack`, both already lowercase.
bool contains_word(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return false;
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
        const bool left_ok = pos == 0 || !is_word_char(static_cast<unsigned char>(haystack[pos - 1]));
        const std::size_t end = pos + needle.size();
        const bool right_ok =
            end == haystack.size() || !is_word_char(static_cast<unsigned char>(haystack[end]));
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

const std::string& system_content(const GenerationRequest& request) {
    for (const ChatMessage& m : request.messages) {
        if (m.role == Role::System) return m.content;
    }
    throw ProtocolError("scripted backend: request has no system message");
}

const std::string& last_user_content(const GenerationRequest& request) {
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
        if (it->role == Role::User) return it->content;
    }
    throw ProtocolError("scripted backend: request has no user message");
}

// Strips a leading "12. " / "3) " / "- " list marker, if any.
std::string_view strip_list_marker(std::string_view line) {
    std::string_view s = trim(line);
    if (!s.empty() && (s.front() == '-' || s.front() == '*')) {
        s.remove_prefix(1);
        return trim(s);
    }
    std::size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) {
        return trim(s.substr(i + 1));
    }
    return s;
}

}  // namespace

std::optional<int> resolve_item_line(const ItemCatalog& catalog, std::string_view line) {
    const std::string_view cleaned = trim(line);
    std::optional<int> best;
    std::size_t best_len = 0;
    for (const Item& item : catalog.items()) {
        const std::string& title = item.title;
        if (title.size() > cleaned.size() || title.size() <= best_len) continue;
        if (cleaned.substr(0, title.size()) != title) continue;
        if (cleaned.size() > title.size()) {
            const std::string_view rest = trim(cleaned.substr(title.size()));
            if (!rest.empty() && rest.front() != '(') continue;
        }
        best = item.item_id;
        best_len = title.size();
    }
    return best;
}

ScriptedUserBackend::ScriptedUserBackend(const ItemCatalog& catalog,
                                         ScriptedUserConfig config)
    : catalog_(catalog), config_(std::move(config)) {
    for (const std::string& t : config_.target_attributes) {
        normalized_targets_.push_back(to_lower(t));
    }
}

double ScriptedUserBackend::acceptance_probability(const Item& item) const {
    std::set<std::string> attrs;
    for (AttributeKind kind : kAllAttributeKinds) {
        for (const std::string& v : item.values(kind)) attrs.insert(to_lower(v));
    }
    std::set<std::string> targets(normalized_targets_.begin(), normalized_targets_.end());
    std::size_t inter = 0;
    for (const std::string& t : targets) inter += attrs.count(t);
    const std::size_t uni = attrs.size() + targets.size() - inter;
    const double jaccard = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
    return std::clamp(jaccard, config_.clamp_lo, config_.clamp_hi);
}

GenerationResult ScriptedUserBackend::generate_once(const GenerationRequest& request) {
    const std::string& task = system_content(request);
    if (task == prompts::kScoringTask) return answer_scoring(request);
    if (task == prompts::kCritiqueTask) return answer_critique(request);
    throw ProtocolError("scripted user: unrecognized task description");
}

GenerationResult ScriptedUserBackend::answer_scoring(const GenerationRequest& request) const {
    const std::vector<std::string> lines = split_lines(last_user_content(request));
    std::optional<int> item_id;
    for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
        if (trim(lines[i]) == prompts::kRecommendedItemHeader) {
            item_id = resolve_item_line(catalog_, lines[i + 1]);
            break;
        }
    }
    if (!item_id) {
        throw ProtocolError("scripted user: scoring prompt has no resolvable item line");
    }
    const double p_yes = acceptance_probability(catalog_.at(*item_id));

    GenerationResult result;
    result.backend_name = name();
    result.text = p_yes >= 0.5 ? " Yes" : " No";
    if (request.want_token_alternatives) {
        std::vector<TokenProbability> alts = {{" Yes", p_yes}, {" No", 1.0 - p_yes}};
        if (alts[1].probability > alts[0].probability) std::swap(alts[0], alts[1]);
        result.first_token_alternatives = std::move(alts);
    }
    return result;
}

GenerationResult ScriptedUserBackend::answer_critique(const GenerationRequest& request) const {
    const std::vector<std::string> lines = split_lines(last_user_content(request));

    // Attribute values present in the recommended list.
    std::set<std::string> listed;
    // Targets from the preference section when present (teacher mode),
    // otherwise the configured hidden targets.
    std::vector<std::string> targets;
    bool in_list = false;
    bool in_preference = false;
    for (const std::string& raw : lines) {
        const std::string_view line = trim(raw);
        if (line == prompts::kRecommendedItemsHeader) {
            in_list = true;
            in_preference = false;
            continue;
        }
        if (line == prompts::kPreferenceHeader) {
            in_preference = true;
            in_list = false;
            continue;
        }
        if (line.empty()) {
            in_list = false;
            continue;
        }
        if (!in_list && !in_preference) continue;
        const auto id = resolve_item_line(catalog_, strip_list_marker(line));
        if (!id) continue;
        const Item& item = catalog_.at(*id);
        for (AttributeKind kind : kAllAttributeKinds) {
            for (const std::string& v : item.values(kind)) {
                const std::string lower = to_lower(v);
                if (in_list) listed.insert(lower);
                if (in_preference &&
                    std::find(targets.begin(), targets.end(), lower) == targets.end()) {
                    targets.push_back(lower);
                }
            }
        }
    }
    if (targets.empty()) targets = normalized_targets_;

    std::vector<std::string> missing;
    for (const std::string& t : targets) {
        if (!listed.contains(t)) missing.push_back(t);
    }

    GenerationResult result;
    result.backend_name = name();
    if (missing.empty()) {
        result.text = "These recommendations look great. Exactly what I was looking for!";
        return result;
    }
    std::size_t pick = 0;
    if (request.temperature > 0.0 && missing.size() > 1) {
        SplitMix64 rng(request.seed.value_or(0));
        pick = static_cast<std::size_t>(rng.bounded(missing.size()));
    }
    result.text = "Thanks for the suggestions! But I would like to see more " +
                  missing[pick] + " elements.";
    return result;
}

ScriptedCrsBackend::ScriptedCrsBackend(const ItemCatalog& catalog, ScriptedCrsConfig config)
    : catalog_(catalog), config_(config) {
    std::unordered_map<std::string, int> index;
    item_attribute_ids_.resize(catalog_.size());
    for (const Item& item : catalog_.items()) {
        for (AttributeKind kind : kAllAttributeKinds) {
            for (const std::string& v : item.values(kind)) {
                const std::string lower = to_lower(v);
                auto [it, inserted] =
                    index.emplace(lower, static_cast<int>(vocabulary_.size()));
                if (inserted) vocabulary_.push_back(lower);
                auto& ids = item_attribute_ids_[static_cast<std::size_t>(item.item_id)];
                if (std::find(ids.begin(), ids.end(), it->second) == ids.end()) {
                    ids.push_back(it->second);
                }
            }
        }
    }
}

GenerationResult ScriptedCrsBackend::generate_once(const GenerationRequest& request) {
    // Honor the list length stated in the task description when present.
    int list_length = config_.list_length;
    {
        const std::string& task = system_content(request);
        const std::size_t pos = task.find("recommend ");
        if (pos != std::string::npos) {
            int parsed = 0;
            std::size_t i = pos + 10;
            bool any = false;
            while (i < task.size() && std::isdigit(static_cast<unsigned char>(task[i]))) {
                parsed = parsed * 10 + (task[i] - '0');
                ++i;
                any = true;
            }
            if (any && parsed > 0) list_length = parsed;
        }
    }

    // Attribute mentions from dialogue lines and the feedback line. The
    // previous-list section is deliberately ignored; preferences only enter
    // through what the user actually said.
    std::vector<bool> mentioned(vocabulary_.size(), false);
    for (const std::string& raw : split_lines(last_user_content(request))) {
        const std::string_view line = trim(raw);
        const bool dialogue = line.substr(0, prompts::kSeekerTag.size()) == prompts::kSeekerTag ||
                              line.substr(0, prompts::kRecommenderTag.size()) ==
                                  prompts::kRecommenderTag;
        const bool feedback =
            line.substr(0, prompts::kFeedbackPrefix.size()) == prompts::kFeedbackPrefix;
        if (!dialogue && !feedback) continue;
        const std::string lower = to_lower(line);
        for (std::size_t v = 0; v < vocabulary_.size(); ++v) {
            if (!mentioned[v] && contains_word(lower, vocabulary_[v])) mentioned[v] = true;
        }
    }

    struct Ranked {
        double key;
        int id;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(catalog_.size());
    SplitMix64 rng(request.seed.value_or(0));
    const double tau = request.temperature;
    for (std::size_t i = 0; i < catalog_.size(); ++i) {
        int overlap = 0;
        for (int v : item_attribute_ids_[i]) {
            if (mentioned[static_cast<std::size_t>(v)]) ++overlap;
        }
        double key = static_cast<double>(overlap);
        if (tau > 0.0) key = key / tau + rng.gumbel();
        ranked.push_back({key, static_cast<int>(i)});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.key != b.key) return a.key > b.key;
        return a.id < b.id;
    });

    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(list_length), ranked.size());
    std::vector<std::string> lines;
    lines.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        lines.push_back(catalog_.at(ranked[i].id).title);
    }

    GenerationResult result;
    result.backend_name = name();
    result.text = prompts::numbered_lines(lines);
    return result;
}

}  // namespace recsearch
