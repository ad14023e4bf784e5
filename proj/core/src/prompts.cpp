#include "recsearch/prompts.hpp"

namespace recsearch::prompts {

std::string recommender_task(int list_length) {
    const std::string l = std::to_string(list_length);
    return "You are a recommender chatting with the user. Based on the conversation, "
           "recommend " + l + " items. Output only a numbered list of item titles. "
           "Output exactly " + l + " titles, one per line, numbered.";
}

std::string serialize_history(std::span<const Utterance> history) {
    std::string out;
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (i > 0) out += '\n';
        out += history[i].speaker == Speaker::Seeker ? kSeekerTag : kRecommenderTag;
        out += history[i].text;
    }
    return out;
}

std::string numbered_lines(std::span<const std::string> lines) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) out += '\n';
        out += std::to_string(i + 1);
        out += ". ";
        out += lines[i];
    }
    return out;
}

std::vector<ChatMessage> scoring_messages(std::span<const Utterance> history,
                                          const std::string& item_line) {
    std::string user = serialize_history(history);
    user += "\n\n";
    user += kRecommendedItemHeader;
    user += '\n';
    user += item_line;
    return {{Role::System, std::string(kScoringTask)}, {Role::User, std::move(user)}};
}

std::vector<ChatMessage> critique_messages(
    std::span<const Utterance> history, std::span<const std::string> item_lines,
    const std::optional<std::vector<std::string>>& preference_lines) {
    std::string user = serialize_history(history);
    user += "\n\n";
    user += kRecommendedItemsHeader;
    user += '\n';
    user += numbered_lines(item_lines);
    if (preference_lines) {
        user += "\n\n";
        user += kPreferenceHeader;
        for (const std::string& line : *preference_lines) {
            user += "\n- ";
            user += line;
        }
    }
    return {{Role::System, std::string(kCritiqueTask)}, {Role::User, std::move(user)}};
}

}  // namespace recsearch::prompts
