// SPDX-License-Identifier: Apache-2.0
#include <imagent/errors.hpp>
#include <imagent/policy.hpp>
#include <imagent/templates.hpp>

#include <test_support.hpp>

#include <gtest/gtest.h>

#include <algorithm>

using namespace imagent;
using imagent::testing::CannedBackend;
using imagent::testing::sim_image;

namespace
{

const ActionSet kNoImageMask { ActionKind::NaiveGeneration, ActionKind::PromptEnhancement, ActionKind::BestOfN };

ImageRef any_image(ArtifactStore& store) { return sim_image(store, { "bread" }); }

Observation obs(int step, ActionKind a, std::string feedback = "ok")
{
    Observation o;
    o.step = step;
    o.action = a;
    o.rationale = "because";
    o.feedback = std::move(feedback);
    return o;
}

Decision expect_decision(const ParseOutcome& outcome)
{
    if (auto const* e = std::get_if<ParseError>(&outcome))
        ADD_FAILURE() << "parse error: " << e->message;
    return std::holds_alternative<Decision>(outcome) ? std::get<Decision>(outcome) : Decision {};
}

ParseError expect_error(const ParseOutcome& outcome)
{
    EXPECT_TRUE(std::holds_alternative<ParseError>(outcome));
    return std::holds_alternative<ParseError>(outcome) ? std::get<ParseError>(outcome) : ParseError {};
}

} // namespace

TEST(ActionMask, GenerationWithoutImage)
{
    auto s = AgentState::for_generation("moldy bread");
    EXPECT_EQ(action_mask(s), kNoImageMask);
}

TEST(ActionMask, EditingFirstStepExcludesOnlyStop)
{
    ArtifactStore store;
    auto s = AgentState::for_editing("add mold", any_image(store));
    auto expected = ActionSet::all();
    expected.erase(ActionKind::Stop);
    EXPECT_EQ(action_mask(s), expected);
    s.step_index = 2;
    EXPECT_EQ(action_mask(s), ActionSet::all());
}

TEST(ActionMask, GenerationWithImageAllowsEverything)
{
    ArtifactStore store;
    auto s = AgentState::for_generation("moldy bread");
    s.current_image = any_image(store);
    s.step_index = 3;
    EXPECT_EQ(action_mask(s), ActionSet::all());
}

TEST(ActionMask, NoEditCapabilityDropsRefinement)
{
    ArtifactStore store;
    auto s = AgentState::for_generation("moldy bread");
    s.current_image = any_image(store);
    Capabilities caps;
    caps.supports_edit = false;
    auto m = action_mask(s, caps);
    EXPECT_FALSE(m.contains(ActionKind::ImageDetailRefinement));
    EXPECT_TRUE(m.contains(ActionKind::PromptRevision));
}

TEST(ActionMask, BlindUnderstandingDropsImageReadingActions)
{
    ArtifactStore store;
    auto s = AgentState::for_generation("moldy bread");
    s.current_image = any_image(store);
    s.step_index = 2;
    Capabilities caps;
    caps.supports_image_in_understand = false;
    EXPECT_EQ(action_mask(s, caps),
              (ActionSet { ActionKind::NaiveGeneration, ActionKind::PromptEnhancement, ActionKind::Stop }));
    EXPECT_EQ(action_mask(AgentState::for_editing("add mold", any_image(store)), caps),
              (ActionSet { ActionKind::NaiveGeneration, ActionKind::PromptEnhancement }));
}

TEST(PolicyPrompt, EmptyHistoryShowsSentinelAndOnlyPermittedActions)
{
    RunConfig config;
    auto prompt = build_policy_prompt(AgentState::for_generation("moldy bread"), config);
    EXPECT_NE(prompt.find("no actions taken yet"), std::string::npos);
    EXPECT_NE(prompt.find("- naive_generation:"), std::string::npos);
    EXPECT_NE(prompt.find("- prompt_enhancement:"), std::string::npos);
    EXPECT_NE(prompt.find("- best_of_N_sampling:"), std::string::npos);
    EXPECT_EQ(prompt.find("prompt_refinement"), std::string::npos);
    EXPECT_EQ(prompt.find("image_detail_refinement"), std::string::npos);
    EXPECT_EQ(prompt.find("STOP"), std::string::npos);
    EXPECT_NE(prompt.find("Original request: moldy bread"), std::string::npos);
    EXPECT_NE(prompt.find("Current image: none"), std::string::npos);
    EXPECT_NE(prompt.find(R"({"action":)"), std::string::npos);
}

TEST(PolicyPrompt, OlderObservationsSummarizedByName)
{
    ArtifactStore store;
    RunConfig config;
    auto s = AgentState::for_generation("moldy bread");
    s.current_image = any_image(store);
    s.history = { obs(1, ActionKind::BestOfN, "fb-1"),        obs(2, ActionKind::PromptRevision, "fb-2"),
                  obs(3, ActionKind::ImageDetailRefinement, "fb-3"), obs(4, ActionKind::NaiveGeneration, "fb-4"),
                  obs(5, ActionKind::PromptEnhancement, "fb-5"), obs(6, ActionKind::BestOfN, "fb-6"),
                  obs(7, ActionKind::NaiveGeneration, "fb-7") };
    s.step_index = 8;
    auto prompt = build_policy_prompt(s, config);
    EXPECT_NE(prompt.find("Earlier actions (steps 1-2): best_of_N_sampling, prompt_refinement"), std::string::npos);
    EXPECT_EQ(prompt.find("fb-1"), std::string::npos);
    EXPECT_EQ(prompt.find("fb-2"), std::string::npos);
    for (int i = 3; i <= 7; ++i)
        EXPECT_NE(prompt.find("[step " + std::to_string(i) + "]"), std::string::npos) << i;
    for (int i = 3; i <= 7; ++i)
        EXPECT_NE(prompt.find("fb-" + std::to_string(i)), std::string::npos) << i;
}

TEST(PolicyPrompt, RepeatedActionsCountedInSummary)
{
    RunConfig config;
    config.history_window = 1;
    auto s = AgentState::for_generation("x");
    s.history = { obs(1, ActionKind::NaiveGeneration), obs(2, ActionKind::NaiveGeneration), obs(3, ActionKind::BestOfN) };
    auto prompt = build_policy_prompt(s, config);
    EXPECT_NE(prompt.find("Earlier actions (steps 1-2): naive_generation x2"), std::string::npos);
}

TEST(PolicyPrompt, Deterministic)
{
    RunConfig config;
    auto s = AgentState::for_generation("moldy bread");
    s.history = { obs(1, ActionKind::NaiveGeneration) };
    EXPECT_EQ(build_policy_prompt(s, config), build_policy_prompt(s, config));
}

TEST(PolicyPrompt, EditingReferencesInputImage)
{
    ArtifactStore store;
    RunConfig config;
    auto s = AgentState::for_editing("add mold", any_image(store));
    auto prompt = build_policy_prompt(s, config);
    EXPECT_NE(prompt.find("Task mode: editing"), std::string::npos);
    EXPECT_NE(prompt.find("<attached image 2>"), std::string::npos);
    EXPECT_EQ(policy_images(s).size(), 2u);
}

TEST(PolicyPrompt, LengthStaysUnderCeiling)
{
    RunConfig config;
    std::mt19937_64 rng(5);
    std::string huge(20000, 'x');
    auto s = AgentState::for_generation(huge);
    s.current_prompt = huge;
    for (int i = 1; i <= 200; ++i)
    {
        auto a = kAllActions[rng() % 5];
        auto o = obs(i, a, std::string(rng() % 3000, 'f'));
        o.rationale = std::string(rng() % 3000, 'r');
        o.score = 0.5;
        s.history.push_back(o);
        auto const prompt = build_policy_prompt(s, config, ActionSet::all());
        ASSERT_LE(prompt.size(), policy_prompt_ceiling(config)) << "history " << i;
    }
}

TEST(ParseDecision, JsonStop)
{
    auto d = expect_decision(parse_decision(R"({"action":"STOP","reason":"satisfactory"})", ActionSet::all()));
    EXPECT_EQ(d.action, ActionKind::Stop);
    EXPECT_EQ(d.rationale, "satisfactory");
    EXPECT_EQ(d.parse_attempts, 1);
}

TEST(ParseDecision, JsonPromptRefinementMapsToRevision)
{
    auto d = expect_decision(parse_decision(
        R"({"action":"prompt_refinement","reason":"image does not clearly show the mold"})", ActionSet::all()));
    EXPECT_EQ(d.action, ActionKind::PromptRevision);
    EXPECT_EQ(d.rationale, "image does not clearly show the mold");
}

TEST(ParseDecision, MaskedJsonActionIsRejected)
{
    auto e = expect_error(parse_decision(R"({"action":"image_detail_refinement","reason":"x"})", kNoImageMask));
    EXPECT_EQ(e.kind, ParseErrorKind::MaskedAction);
    EXPECT_EQ(e.action, ActionKind::ImageDetailRefinement);
}

TEST(ParseDecision, BareNameViaTolerantExtraction)
{
    EXPECT_EQ(expect_decision(parse_decision("Best-of-N Sampling", ActionSet::all())).action, ActionKind::BestOfN);
    EXPECT_EQ(expect_decision(parse_decision("I choose prompt$\\_$refinement.", ActionSet::all())).action,
              ActionKind::PromptRevision);
}

TEST(ParseDecision, EarliestMentionWins)
{
    auto d = expect_decision(
        parse_decision("Start with naive generation; once it looks right we can STOP.", ActionSet::all()));
    EXPECT_EQ(d.action, ActionKind::NaiveGeneration);
}

TEST(ParseDecision, LongestSpellingAtSameOffset)
{
    auto d = expect_decision(parse_decision("best of n sampling", ActionSet::all()));
    EXPECT_EQ(d.action, ActionKind::BestOfN);
}

TEST(ParseDecision, WordBoundariesRespected)
{
    EXPECT_EQ(expect_error(parse_decision("unstoppable nonstop", ActionSet::all())).kind, ParseErrorKind::NoAction);
}

TEST(ParseDecision, JsonInsideProse)
{
    auto d = expect_decision(parse_decision(
        "Thinking... {\"note\": \"{not this}\"} then {\"action\": \"best_of_N_sampling\", \"reason\": \"r\"} done",
        ActionSet::all()));
    EXPECT_EQ(d.action, ActionKind::BestOfN);
    EXPECT_EQ(d.rationale, "r");
}

TEST(ParseDecision, GibberishIsNoAction)
{
    EXPECT_EQ(expect_error(parse_decision("gibberish", ActionSet::all())).kind, ParseErrorKind::NoAction);
    EXPECT_EQ(expect_error(parse_decision("", ActionSet::all())).kind, ParseErrorKind::NoAction);
}

TEST(ParseDecision, TotalOnAdversarialInputs)
{
    std::mt19937_64 rng(2024);
    static const std::vector<std::string> fragments {
        "{", "}", "\"", "\\", "action", "\"action\"", ":", "STOP", "stop", "naive", "generation", "naive_generation",
        "best", "of", "N", "$\\_$", "_", "-", " ", "\n", "prompt", "refinement", "image_detail_refinement",
        "{\"action\":", "\"STOP\"}", "{\"action\": 5}", "{\"action\": null}", "[", "]", "\xff", "\x00", "\xe2\x80\x94",
        "reason", "prompt_enhancement", "best_of_N_sampling", "{{{{", "}}}}", "\"\\\"",
    };
    std::vector<ActionSet> masks { ActionSet::all(), kNoImageMask, ActionSet {}, ActionSet { ActionKind::Stop } };
    for (int i = 0; i < 1000; ++i)
    {
        std::string raw;
        int parts = static_cast<int>(rng() % 40);
        for (int p = 0; p < parts; ++p)
        {
            if (rng() % 4 == 0)
                raw.push_back(static_cast<char>(rng() % 256));
            else
                raw += fragments[rng() % fragments.size()];
        }
        for (auto const& mask: masks)
        {
            ParseOutcome outcome;
            ASSERT_NO_THROW(outcome = parse_decision(raw, mask)) << raw;
            if (auto const* d = std::get_if<Decision>(&outcome))
                EXPECT_TRUE(mask.contains(d->action)) << raw;
            else if (std::get<ParseError>(outcome).kind == ParseErrorKind::MaskedAction)
                EXPECT_FALSE(mask.contains(*std::get<ParseError>(outcome).action)) << raw;
        }
    }
}

TEST(Decide, ParsesControllerReplyAndAttachesImages)
{
    CannedBackend backend([](const UnderstandRequest&) { return R"({"action":"prompt_refinement","reason":"r"})"; });
    auto s = AgentState::for_generation("moldy bread");
    s.current_image = any_image(backend.artifacts());
    s.step_index = 2;
    auto d = decide(backend, s, RunConfig {});
    EXPECT_EQ(d.action, ActionKind::PromptRevision);
    EXPECT_FALSE(d.fallback);
    ASSERT_EQ(backend.requests.size(), 1u);
    EXPECT_EQ(backend.requests[0].images.size(), 1u);
    EXPECT_EQ(backend.requests[0].template_id, templates::id_string(templates::TemplateId::PolicyGeneration));
}

TEST(Decide, RetriesThenFallsBackToStopWithImage)
{
    CannedBackend backend([](const UnderstandRequest&) { return "gibberish"; });
    auto s = AgentState::for_generation("moldy bread");
    s.current_image = any_image(backend.artifacts());
    s.step_index = 2;
    RunConfig config;
    auto d = decide(backend, s, config);
    EXPECT_EQ(d.action, ActionKind::Stop);
    EXPECT_TRUE(d.fallback);
    EXPECT_EQ(d.parse_attempts, config.parse_retries + 1);
    ASSERT_EQ(backend.requests.size(), static_cast<std::size_t>(config.parse_retries + 1));
    EXPECT_EQ(backend.requests[1].text.find(backend.requests[0].text), 0u);
    EXPECT_NE(backend.requests[1].text.find("could not be used"), std::string::npos);
}

TEST(Decide, FallbackWithoutImageIsNaive)
{
    CannedBackend backend([](const UnderstandRequest&) { return "???"; });
    RunConfig config;
    config.parse_retries = 0;
    auto d = decide(backend, AgentState::for_generation("moldy bread"), config);
    EXPECT_EQ(d.action, ActionKind::NaiveGeneration);
    EXPECT_TRUE(d.fallback);
    EXPECT_EQ(backend.requests.size(), 1u);
}

TEST(Decide, FallbackWhenStopMaskedIsNaive)
{
    CannedBackend backend([](const UnderstandRequest&) { return "STOP"; });
    auto s = AgentState::for_editing("add mold", any_image(backend.artifacts()));
    auto d = decide(backend, s, RunConfig {});
    EXPECT_EQ(d.action, ActionKind::NaiveGeneration);
    EXPECT_TRUE(d.fallback);
}

TEST(Decide, MaskedReplyIsRetriedNotObeyed)
{
    int calls = 0;
    CannedBackend backend([&](const UnderstandRequest&) {
        return ++calls == 1 ? R"({"action":"STOP"})" : R"({"action":"best_of_N_sampling"})";
    });
    auto d = decide(backend, AgentState::for_generation("moldy bread"), RunConfig {});
    EXPECT_EQ(d.action, ActionKind::BestOfN);
    EXPECT_EQ(d.parse_attempts, 2);
}

TEST(Decide, OmitsImagesWhenBackendCannotTakeThem)
{
    SimWorldConfig world;
    world.capabilities.supports_image_in_understand = false;
    CannedBackend backend([](const UnderstandRequest&) { return R"({"action":"STOP"})"; }, world);
    auto s = AgentState::for_generation("moldy bread");
    s.current_image = any_image(backend.artifacts());
    s.step_index = 2;
    auto d = decide(backend, s, RunConfig {});
    EXPECT_TRUE(d.images_omitted);
    EXPECT_TRUE(backend.requests[0].images.empty());
    EXPECT_NE(backend.requests[0].text.find("<available, not attached>"), std::string::npos);
}

TEST(Decide, BackendErrorsPropagate)
{
    CannedBackend backend([](const UnderstandRequest&) -> std::string {
        throw BackendError(BackendErrorKind::Unreachable, "down");
    });
    EXPECT_THROW(decide(backend, AgentState::for_generation("x"), RunConfig {}), BackendError);
}

TEST(Decide, NeverLeavesTheMaskUnderAdversarialReplies)
{
    std::mt19937_64 rng(99);
    std::vector<std::string> pool { "STOP", "{\"action\":\"image_detail_refinement\"}", "prompt refinement",
                                    "junk", "{\"action\":\"naive_generation\"}", "", "best of n" };
    for (int i = 0; i < 300; ++i)
    {
        std::vector<std::string> replies;
        CannedBackend backend([&](const UnderstandRequest&) {
            replies.push_back(pool[rng() % pool.size()]);
            return replies.back();
        });
        AgentState s = rng() % 2 ? AgentState::for_generation("moldy bread")
                                 : AgentState::for_editing("add mold", any_image(backend.artifacts()));
        if (rng() % 2)
            s.current_image = any_image(backend.artifacts());
        s.step_index = 1 + static_cast<int>(rng() % 3);
        RunConfig config;
        config.parse_retries = static_cast<int>(rng() % 3);
        auto mask = action_mask(s, backend.capabilities());
        auto d = decide(backend, s, config);
        ASSERT_TRUE(mask.contains(d.action));

        // The fallback fires exactly when no reply parsed under the mask.
        bool anyParsed = std::ranges::any_of(
            replies, [&](auto const& r) { return std::holds_alternative<Decision>(parse_decision(r, mask)); });
        EXPECT_EQ(d.fallback, !anyParsed);
        if (d.fallback)
            EXPECT_EQ(d.action, s.current_image && mask.contains(ActionKind::Stop) ? ActionKind::Stop
                                                                                   : ActionKind::NaiveGeneration);
    }
}
