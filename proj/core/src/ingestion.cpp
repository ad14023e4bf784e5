#include "recsearch/ingestion.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "recsearch/errors.hpp"

namespace recsearch {

namespace {

Utterance utterance_from_json(const nlohmann::json& j, const ItemCatalog& catalog) {
    Utterance u;
    u.speaker = speaker_from_name(j.at("speaker").get<std::string>());
    u.text = j.at("text").get<std::string>();
    u.mentioned_item_ids = j.at("items").get<std::vector<int>>();
    for (int id : u.mentioned_item_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= catalog.size()) {
            throw ParseError("mentioned item id " + std::to_string(id) +
                             " is not in the catalog");
        }
    }
    return u;
}

nlohmann::json utterance_to_json(const Utterance& u) {
    return {{"speaker", std::string(speaker_name(u.speaker))},
            {"text", u.text},
            {"items", u.mentioned_item_ids}};
}

}  // namespace

std::vector<Conversation> load_conversations(const std::string& path,
                                             const ItemCatalog& catalog) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open corpus file: " + path);

    std::vector<Conversation> conversations;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            Conversation conv;
            conv.conv_id = j.at("conv_id").get<std::string>();
            if (conv.conv_id.empty()) throw ParseError("conv_id is empty");
            if (!seen_ids.insert(conv.conv_id).second) {
                throw ParseError("duplicate conv_id '" + conv.conv_id + "'");
            }
            for (const auto& jt : j.at("turns")) {
                conv.turns.push_back(utterance_from_json(jt, catalog));
            }
            if (conv.turns.empty()) {
                throw ParseError("conversation '" + conv.conv_id + "' has no turns");
            }
            conversations.push_back(std::move(conv));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (conversations.empty()) throw ParseError("empty corpus file: " + path);
    return conversations;
}

std::vector<RecommendationTurn> derive_recommendation_turns(
    std::span<const Conversation> conversations, bool dedupe) {
    std::vector<RecommendationTurn> turns;
    for (const Conversation& conv : conversations) {
        std::unordered_set<int> seen_earlier;
        for (std::size_t k = 0; k < conv.turns.size(); ++k) {
            const Utterance& utterance = conv.turns[k];
            if (utterance.speaker == Speaker::Recommender &&
                !utterance.mentioned_item_ids.empty() && k > 0) {
                std::vector<int> gt;
                std::unordered_set<int> in_gt;
                for (int id : utterance.mentioned_item_ids) {
                    if (dedupe && seen_earlier.contains(id)) continue;
                    if (in_gt.insert(id).second) gt.push_back(id);
                }
                if (!gt.empty()) {
                    std::sort(gt.begin(), gt.end());
                    RecommendationTurn turn;
                    turn.conv_id = conv.conv_id;
                    turn.turn_index = static_cast<int>(k);
                    turn.history.assign(conv.turns.begin(),
                                        conv.turns.begin() + static_cast<std::ptrdiff_t>(k));
                    turn.ground_truth_item_ids = std::move(gt);
                    turns.push_back(std::move(turn));
                }
            }
            for (int id : utterance.mentioned_item_ids) seen_earlier.insert(id);
        }
    }
    return turns;
}

std::string_view split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Valid: return "valid";
        case Split::Test: return "test";
    }
    throw ValidationError("unknown split");
}

std::map<std::string, Split> load_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open split file: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("split file: " + std::string(e.what()));
    }

    std::map<std::string, Split> assignment;
    const std::pair<const char*, Split> sections[] = {
        {"train", Split::Train}, {"valid", Split::Valid}, {"test", Split::Test}};
    for (const auto& [key, split] : sections) {
        if (!j.contains(key)) {
            throw ParseError(std::string("split file: missing key '") + key + "'");
        }
        for (const auto& id : j.at(key)) {
            const std::string conv_id = id.get<std::string>();
            auto [it, inserted] = assignment.emplace(conv_id, split);
            if (!inserted) {
                throw ParseError("split file: conv_id '" + conv_id + "' appears in both " +
                                 std::string(split_name(it->second)) + " and " + key);
            }
        }
    }
    return assignment;
}

std::vector<std::string> split_coverage_warnings(
    const std::map<std::string, Split>& split,
    std::span<const Conversation> conversations) {
    std::unordered_set<std::string> known;
    for (const Conversation& conv : conversations) known.insert(conv.conv_id);
    std::vector<std::string> missing;
    for (const auto& [conv_id, _] : split) {
        if (!known.contains(conv_id)) missing.push_back(conv_id);
    }
    return missing;
}

void write_turns(const std::string& path, std::span<const RecommendationTurn> turns) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write turns file: " + path);
    for (const RecommendationTurn& turn : turns) {
        nlohmann::json history = nlohmann::json::array();
        for (const Utterance& u : turn.history) history.push_back(utterance_to_json(u));
        const nlohmann::json j = {{"conv_id", turn.conv_id},
                                  {"turn_index", turn.turn_index},
                                  {"history", std::move(history)},
                                  {"ground_truth", turn.ground_truth_item_ids}};
        out << j.dump() << '\n';
    }
}

std::vector<RecommendationTurn> load_turns(const std::string& path,
                                           const ItemCatalog& catalog) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open turns file: " + path);
    std::vector<RecommendationTurn> turns;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            RecommendationTurn turn;
            turn.conv_id = j.at("conv_id").get<std::string>();
            turn.turn_index = j.at("turn_index").get<int>();
            for (const auto& jt : j.at("history")) {
                turn.history.push_back(utterance_from_json(jt, catalog));
            }
            turn.ground_truth_item_ids = j.at("ground_truth").get<std::vector<int>>();
            if (turn.history.empty()) {
                throw ParseError("turn has empty history");
            }
            if (turn.ground_truth_item_ids.empty()) {
                throw ParseError("turn has empty ground truth");
            }
            for (int id : turn.ground_truth_item_ids) {
                if (id < 0 || static_cast<std::size_t>(id) >= catalog.size()) {
                    throw ParseError("ground truth item id " + std::to_string(id) +
                                     " is not in the catalog");
                }
            }
            turns.push_back(std::move(turn));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("turns line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError("turns line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return turns;
}

}  // namespace recsearch
