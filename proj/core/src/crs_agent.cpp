#include "recsearch/crs_agent.hpp"

#include <cctype>
#include <unordered_set>

#include "recsearch/errors.hpp"
#include "recsearch/prompts.hpp"

namespace recsearch {

std::vector<ChatMessage> render_recommendation_prompt(const RecommendationPrompt& prompt) {
    if (prompt.previous_list.has_value() != prompt.feedback.has_value()) {
        throw ValidationError(
            "recommendation prompt: previous_list and feedback must be set together");
    }
    if (prompt.list_length <= 0) {
        throw ValidationError("recommendation prompt: list_length must be positive");
    }

    std::string user = prompts::serialize_history(prompt.history);
    if (prompt.previous_list) {
        std::vector<std::string> lines;
        lines.reserve(prompt.previous_list->size());
        for (const Item& item : *prompt.previous_list) {
            lines.push_back(format_item_with_attributes(item));
        }
        user += "\n\n";
        user += prompts::kPreviousListHeader;
        user += '\n';
        user += prompts::numbered_lines(lines);
        user += "\n\n";
        user += prompts::kFeedbackPrefix;
        user += *prompt.feedback;
        user += "\n\n";
        user += prompts::kReviseInstruction;
    }
    return {{Role::System, prompts::recommender_task(prompt.list_length)},
            {Role::User, std::move(user)}};
}

namespace {

// Returns the text after a leading list marker, or nullopt when the line is
// not a list entry. Accepted markers: "12." / "12)" / "-" / "*" / "•".
std::optional<std::string_view> strip_marker(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    line.remove_prefix(i);
    if (line.empty()) return std::nullopt;

    if (line.front() == '-' || line.front() == '*') {
        line.remove_prefix(1);
    } else if (line.size() >= 3 && line.substr(0, 3) == "\xE2\x80\xA2") {  // U+2022
        line.remove_prefix(3);
    } else {
        std::size_t d = 0;
        while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
        if (d == 0 || d >= line.size() || (line[d] != '.' && line[d] != ')')) {
            return std::nullopt;
        }
        line.remove_prefix(d + 1);
    }
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) {
        line.remove_prefix(1);
    }
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) {
        line.remove_suffix(1);
    }
    if (line.empty()) return std::nullopt;
    return line;
}

}  // namespace

std::vector<int> parse_and_ground(const std::string& reply, const ItemCatalog& catalog,
                                  int list_length, double threshold) {
    std::vector<int> items;
    std::unordered_set<int> seen;
    std::size_t pos = 0;
    while (pos <= reply.size() && items.size() < static_cast<std::size_t>(list_length)) {
        const std::size_t nl = reply.find('\n', pos);
        const std::string_view line(reply.data() + pos,
                                    (nl == std::string::npos ? reply.size() : nl) - pos);
        pos = nl == std::string::npos ? reply.size() + 1 : nl + 1;

        const auto candidate = strip_marker(line);
        if (!candidate) continue;
        const MatchResult match = fuzzy_match(*candidate, catalog, threshold);
        if (!match.item_id) continue;
        if (seen.insert(*match.item_id).second) items.push_back(*match.item_id);
    }
    return items;
}

SearchState recommend(Backend& backend, const RecommendationPrompt& prompt,
                      const ItemCatalog& catalog, double temperature,
                      std::optional<std::uint64_t> seed, StateIdAllocator& ids,
                      const StateProvenance& provenance, const RetryPolicy& retry) {
    GenerationRequest request;
    request.messages = render_recommendation_prompt(prompt);
    request.temperature = temperature;
    request.max_new_tokens = 512;
    request.seed = seed;

    const GenerationResult result = generate(backend, request, retry);

    SearchState state;
    state.state_id = ids.next();
    state.items = parse_and_ground(result.text, catalog, prompt.list_length);
    state.depth = provenance.depth;
    state.parent_state_id = provenance.parent_state_id;
    state.critique_used = provenance.critique_used;
    state.validate();
    return state;
}

}  // namespace recsearch
