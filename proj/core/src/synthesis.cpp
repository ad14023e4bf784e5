#include "recsearch/synthesis.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "recsearch/errors.hpp"
#include "recsearch/prompts.hpp"
#include "recsearch/rng.hpp"
#include "recsearch/simulated_user.hpp"

namespace recsearch {

std::string_view behavior_name(Behavior b) {
    return b == Behavior::Scoring ? "scoring" : "critiquing";
}

Behavior behavior_from_name(std::string_view name) {
    if (name == "scoring") return Behavior::Scoring;
    if (name == "critiquing") return Behavior::Critiquing;
    throw ParseError("unknown behavior: " + std::string(name));
}

namespace {

// Whatever subsets of one turn get sampled must not depend on which other
// turns were processed before it; that keeps interrupted runs resumable.
SplitMix64 turn_rng(const RecommendationTurn& turn, std::uint64_t seed) {
    const std::uint64_t conv = fnv1a64(turn.conv_id.data(), turn.conv_id.size());
    return SplitMix64(derive_seed(seed, SeedStream::Negatives, conv,
                                  static_cast<std::uint64_t>(turn.turn_index)));
}

std::string item_line(const ItemCatalog& catalog, int item_id) {
    return format_item_with_attributes(catalog.at(item_id));
}

}  // namespace

std::vector<CritiqueListSpec> build_critiquing_lists(const RecommendationTurn& turn,
                                                     const ItemCatalog& catalog,
                                                     const SynthesisConfig& config) {
    if (config.list_length < 1) {
        throw ConfigError("synthesis: list_length must be >= 1");
    }
    if (config.max_lists < 1) {
        throw ConfigError("synthesis: max_lists must be >= 1");
    }
    const std::vector<int>& gt = turn.ground_truth_item_ids;
    if (gt.empty()) throw ValidationError("synthesis: turn has no ground truth");
    const std::unordered_set<int> gt_set(gt.begin(), gt.end());

    SplitMix64 rng = turn_rng(turn, config.seed);
    std::vector<CritiqueListSpec> lists;

    // Non-empty ground-truth subsets, smallest size first, lexicographic
    // within a size (gt is sorted). Subsets as large as the whole list are
    // excluded: a critique needs at least one slot that can be wrong.
    const std::size_t max_size =
        std::min(gt.size(), static_cast<std::size_t>(config.list_length) - 1);
    for (std::size_t size = 1;
         size <= max_size && lists.size() < static_cast<std::size_t>(config.max_lists);
         ++size) {
        std::vector<std::size_t> idx(size);
        for (std::size_t i = 0; i < size; ++i) idx[i] = i;
        for (;;) {
            CritiqueListSpec spec;
            spec.l_p = static_cast<int>(size);
            spec.l_n = config.list_length - spec.l_p;
            for (std::size_t i : idx) spec.items.push_back(gt[i]);
            const std::vector<int> negatives = sample_negatives(
                catalog, gt_set, static_cast<std::size_t>(spec.l_n), rng.next());
            spec.items.insert(spec.items.end(), negatives.begin(), negatives.end());
            deterministic_shuffle(spec.items, rng);
            lists.push_back(std::move(spec));
            if (lists.size() >= static_cast<std::size_t>(config.max_lists)) break;

            // Advance the combination.
            std::size_t i = size;
            while (i > 0 && idx[i - 1] == gt.size() - size + (i - 1)) --i;
            if (i == 0) break;
            ++idx[i - 1];
            for (std::size_t k = i; k < size; ++k) idx[k] = idx[k - 1] + 1;
        }
    }

    // One list with no ground truth at all.
    CritiqueListSpec all_negative;
    all_negative.l_p = 0;
    all_negative.l_n = config.list_length;
    all_negative.items = sample_negatives(
        catalog, gt_set, static_cast<std::size_t>(config.list_length), rng.next());
    deterministic_shuffle(all_negative.items, rng);
    lists.push_back(std::move(all_negative));
    return lists;
}

std::vector<InstructionExample> build_scoring_examples(const RecommendationTurn& turn,
                                                       const ItemCatalog& catalog,
                                                       const SynthesisConfig& config) {
    if (config.negatives_per_positive < 0) {
        throw ConfigError("synthesis: negatives_per_positive must be >= 0");
    }
    const std::vector<int>& gt = turn.ground_truth_item_ids;
    if (gt.empty()) throw ValidationError("synthesis: turn has no ground truth");
    const std::unordered_set<int> gt_set(gt.begin(), gt.end());
    const RewardTokenConfig tokens;

    SplitMix64 rng = turn_rng(turn, config.seed);
    std::vector<InstructionExample> examples;
    for (int positive : gt) {
        InstructionExample ex;
        ex.behavior = Behavior::Scoring;
        ex.messages = prompts::scoring_messages(turn.history, item_line(catalog, positive));
        ex.target = tokens.question + " " + tokens.positive_token;
        ex.meta = {turn.conv_id, turn.turn_index, 1, 0};
        examples.push_back(std::move(ex));

        const std::vector<int> negatives = sample_negatives(
            catalog, gt_set, static_cast<std::size_t>(config.negatives_per_positive),
            rng.next());
        for (int negative : negatives) {
            InstructionExample neg;
            neg.behavior = Behavior::Scoring;
            neg.messages =
                prompts::scoring_messages(turn.history, item_line(catalog, negative));
            neg.target = tokens.question + " " + tokens.negative_token;
            neg.meta = {turn.conv_id, turn.turn_index, 0, 1};
            examples.push_back(std::move(neg));
        }
    }
    return examples;
}

namespace {

std::string trimmed_copy(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

SynthesisResult synthesize_critiques(Backend& teacher,
                                     std::span<const RecommendationTurn> turns,
                                     const ItemCatalog& catalog,
                                     const SynthesisConfig& config) {
    SynthesisResult result;
    for (const RecommendationTurn& turn : turns) {
        const std::vector<CritiqueListSpec> lists =
            build_critiquing_lists(turn, catalog, config);

        std::vector<std::string> preference_lines;
        preference_lines.reserve(turn.ground_truth_item_ids.size());
        for (int id : turn.ground_truth_item_ids) {
            preference_lines.push_back(item_line(catalog, id));
        }

        std::vector<GenerationRequest> requests;
        requests.reserve(lists.size());
        SplitMix64 rng = turn_rng(turn, config.seed ^ 0x5DEECE66DULL);
        for (const CritiqueListSpec& spec : lists) {
            std::vector<std::string> lines;
            lines.reserve(spec.items.size());
            for (int id : spec.items) lines.push_back(item_line(catalog, id));
            GenerationRequest request;
            request.messages =
                prompts::critique_messages(turn.history, lines, preference_lines);
            request.temperature = config.teacher_temperature;
            request.max_new_tokens = 256;
            request.seed = rng.next();
            requests.push_back(std::move(request));
        }

        const std::vector<BatchOutcome> outcomes =
            generate_batch(teacher, requests, config.max_concurrency);
        for (std::size_t i = 0; i < lists.size(); ++i) {
            if (!outcomes[i].ok()) {
                ++result.failed_calls;
                continue;
            }
            const std::string target = trimmed_copy(outcomes[i].result->text);
            if (target.empty()) {
                ++result.dropped_empty;
                continue;
            }
            std::vector<std::string> lines;
            lines.reserve(lists[i].items.size());
            for (int id : lists[i].items) lines.push_back(item_line(catalog, id));

            InstructionExample ex;
            ex.behavior = Behavior::Critiquing;
            // Stored without the preference section the teacher saw.
            ex.messages = prompts::critique_messages(turn.history, lines);
            ex.target = target;
            ex.meta = {turn.conv_id, turn.turn_index, lists[i].l_p, lists[i].l_n};
            result.examples.push_back(std::move(ex));
        }
    }
    return result;
}

namespace {

nlohmann::json example_to_json(const InstructionExample& ex) {
    nlohmann::json messages = nlohmann::json::array();
    for (const ChatMessage& m : ex.messages) {
        messages.push_back({{"role", std::string(role_name(m.role))}, {"content", m.content}});
    }
    return {{"messages", std::move(messages)},
            {"target", ex.target},
            {"behavior", std::string(behavior_name(ex.behavior))},
            {"meta",
             {{"conv_id", ex.meta.conv_id},
              {"turn_index", ex.meta.turn_index},
              {"l_p", ex.meta.l_p},
              {"l_n", ex.meta.l_n}}}};
}

InstructionExample example_from_json(const nlohmann::json& j) {
    InstructionExample ex;
    ex.behavior = behavior_from_name(j.at("behavior").get<std::string>());
    for (const auto& jm : j.at("messages")) {
        ex.messages.push_back({role_from_name(jm.at("role").get<std::string>()),
                               jm.at("content").get<std::string>()});
    }
    ex.target = j.at("target").get<std::string>();
    const auto& meta = j.at("meta");
    ex.meta.conv_id = meta.at("conv_id").get<std::string>();
    ex.meta.turn_index = meta.at("turn_index").get<int>();
    ex.meta.l_p = meta.at("l_p").get<int>();
    ex.meta.l_n = meta.at("l_n").get<int>();
    return ex;
}

}  // namespace

std::string example_to_json_line(const InstructionExample& example) {
    return example_to_json(example).dump();
}

std::size_t export_dataset(std::span<const InstructionExample> examples,
                           const std::string& path, std::uint64_t seed) {
    // Serialize first and sort the lines so the output depends only on the
    // example set and the seed, not on assembly order. A resumed run that
    // re-reads earlier output therefore rewrites the same bytes.
    std::vector<std::string> lines;
    lines.reserve(examples.size());
    for (const InstructionExample& e : examples) lines.push_back(example_to_json(e).dump());
    std::sort(lines.begin(), lines.end());

    SplitMix64 rng(derive_seed(seed, SeedStream::Shuffle, 0, 0));
    deterministic_shuffle(lines, rng);

    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset file: " + path);
    for (const std::string& line : lines) out << line << '\n';
    return examples.size();
}

std::vector<InstructionExample> read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file: " + path);
    std::vector<InstructionExample> examples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        try {
            examples.push_back(example_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return examples;
}

}  // namespace recsearch
