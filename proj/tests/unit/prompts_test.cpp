// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "macprune/dependency.hpp"
#include "macprune/fixtures.hpp"
#include "macprune/isomorphic.hpp"
#include "macprune/oracle.hpp"
#include "macprune/prompts.hpp"

namespace macprune {
namespace {

std::string golden(const std::string& name) {
  std::ifstream in(std::string(MACPRUNE_TEST_DATA_DIR) + "/golden/prompts/" + name + ".txt", std::ios::binary);
  EXPECT_TRUE(in.good()) << name;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PromptContext sentinels(const std::vector<std::string>& names) {
  PromptContext c;
  for (const auto& n : names) c[n] = "<<" + n + ">>";
  return c;
}

const std::pair<PromptTemplate, const char*> kAll[] = {
    {PromptTemplate::kProfiling, "profiling"},
    {PromptTemplate::kMaster, "master"},
    {PromptTemplate::kAnalysisCnn, "analysis_cnn"},
    {PromptTemplate::kAnalysisVit, "analysis_vit"},
};

TEST(Prompts, TemplatesMatchGoldenBytes) {
  for (const auto& [t, name] : kAll) EXPECT_EQ(std::string(template_text(t)), golden(name)) << name;
}

TEST(Prompts, RenderedTextMatchesGoldenOutsidePlaceholders) {
  for (const auto& [t, name] : kAll) {
    const std::string g = golden(name);
    const auto names = placeholders_in(g);
    EXPECT_EQ(placeholders(t), names) << name;
    const PromptContext ctx = sentinels(names);
    EXPECT_EQ(render_prompt(t, ctx), render_text(g, ctx)) << name;
  }
}

TEST(Prompts, JsonBracesAreNotPlaceholders) {
  for (const auto& [t, name] : kAll) {
    for (const auto& p : placeholders(t)) {
      EXPECT_EQ(p.find('"'), std::string::npos) << name << ": " << p;
      EXPECT_EQ(p.find(' '), std::string::npos) << name << ": " << p;
    }
  }
  EXPECT_EQ(render_text("{\"a\": 1} {x}", {{"x", "2"}}), "{\"a\": 1} 2");
}

TEST(Prompts, MissingValueNamesThePlaceholder) {
  try {
    render_prompt(PromptTemplate::kMaster, {});
    FAIL() << "expected MissingPlaceholder";
  } catch (const MissingPlaceholder& e) {
    EXPECT_FALSE(e.field().empty());
  }
}

TEST(Prompts, ContextBuildersFillEveryPlaceholder) {
  for (const std::string fixture : {"resnet50", "deit-tiny"}) {
    const ModelGraph g = fixture_graph(fixture);
    const auto deps = derive_dependencies(g);
    const auto groups = group_isomorphic(g);
    const ProfileReport prof = build_profile(g, deps, groups, fixture);
    OracleContext ctx;
    ctx.baseline_macs = prof.baseline_macs;
    ctx.target_macs = prof.baseline_macs * 0.5;
    ctx.mode = prof.mode;
    ctx.limits = SafetyLimits::for_profile(g.dataset_profile());
    EXPECT_NO_THROW(render_prompt(PromptTemplate::kProfiling, profiling_prompt_context(prof, ctx))) << fixture;
    EXPECT_NO_THROW(render_prompt(PromptTemplate::kMaster, master_prompt_context(prof, ctx, {}))) << fixture;
    const auto analysis = prof.mode == PruneMode::kVit ? PromptTemplate::kAnalysisVit : PromptTemplate::kAnalysisCnn;
    EXPECT_NO_THROW(render_prompt(analysis, analysis_prompt_context(prof, ctx))) << fixture;
    const auto msgs = build_analysis_messages({}, prof, GuidanceNote{}, ctx);
    ASSERT_FALSE(msgs.empty());
    EXPECT_EQ(msgs.front().role, "system");
  }
}

TEST(Prompts, NamesRoundTrip) {
  for (const auto& [t, name] : kAll) EXPECT_EQ(parse_prompt_template(to_string(t)), t);
  EXPECT_FALSE(parse_prompt_template("nope"));
}

}  // namespace
}  // namespace macprune
