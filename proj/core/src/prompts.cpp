// Copyright (c) 2026 The macprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "macprune/prompts.hpp"

#include <algorithm>

namespace macprune {

namespace {

constexpr std::string_view kProfilingText = R"TPL(You are a neural network profiling expert with MAC-based optimization expertise.

Please be concise. Limit your response to 300 words or fewer.

Analyze the model architecture and identify:
1. Layer structure and computational dependencies
2. MAC operation distribution across layers
3. Structural constraints that must be maintained
4. MAC efficiency opportunities in different layers
5. Asymmetric tolerance policy (IMPORTANT):
   - Overshoot = achieved MACs above target_macs.
     Must be <= +{macs_overshoot_tolerance_pct}
   - Undershoot = achieved MACs below target_macs.
     Allowed down to -{macs_undershoot_tolerance_pct}
   - Preference rule: when accuracy is comparable, follow user preference.

Model architecture: {model_arch}
Dataset: {dataset} ({num_classes} classes, {input_size}x{input_size} input)
Baseline MACs: {baseline_macs}G
Target MACs: {target_macs}G
  Tolerance: +{macs_overshoot_tolerance_pct}
MAC reduction needed: {mac_reduction_needed}%
Accepted MAC range: {undershoot_lower_bound}G-{overshoot_upper_bound}G

Based on the model architecture and MAC budget constraints, provide:
1. Key layers and their MAC operation contributions
2. Critical dependencies between layers
3. Structural constraints that must be preserved
4. Layers with highest MAC reduction potential
5. MAC allocation recommendations for different layer types
6. Specific MAC budget distribution strategy
)TPL";

constexpr std::string_view kMasterText = R"TPL(You are the Master Agent in a multi-agent MAC-budget pruning workflow.
Your role is to coordinate the neural network pruning process and make
high-level strategic decisions to achieve specific MAC operation targets.

PRIMARY GOAL:
THE USER'S MAC TARGET IS SACRED - ALWAYS ATTEMPT IT!
Find the optimal pruned model that achieves EXACTLY the user-requested
MAC budget ({target_macs}G +{macs_overshoot_tolerance_pct}
-{macs_undershoot_tolerance_pct}

FORBIDDEN BEHAVIORS:
- NEVER refuse to attempt the user's MAC target in your first few tries
- NEVER assume aggressive MAC reduction will fail
- NEVER stop after just 1-2 attempts

MAC BUDGET CONTEXT:
- Baseline MACs: {baseline_macs}G
- Target MACs: {target_macs}G
- MAC reduction needed: {mac_reduction_needed}%
- Acceptable range: {min_target_macs_g}G - {max_target_macs_g}G

MAC-BASED EARLY STOPPING CRITERIA:
1. MAC TARGET ACHIEVEMENT: Model within tolerance with reasonable accuracy
2. MAC CONVERGENCE: Multiple iterations within tolerance without improvement
3. MAC CYCLING: History shows cycling without progress
4. MAXIMUM ITERATIONS: Reached maximum revisions

MAC Pruning History and Observed Trends:
{previous_strategies}

Output your MAC-budget pruning strategy as JSON:
{
  "multiplier_tuning_order": ["first_param", "second_param", "third_param"],
  "target_macs": {target_macs},
  "global_pruning": true,
  "rationale": "Why you chose these parameters",
  "continue": true or false,
  "stop_reason": "reason if continue is false" or null
}
)TPL";

constexpr std::string_view kAnalysisCnnText = R"TPL(You are a MAC-budget pruning strategy analyst with STRICT SAFETY ENFORCEMENT.

KEY MAC ALLOCATION PARAMETERS:
1. MAC Budget Allocation: Distribution across layer types
   - Target: {target_macs}G (+{macs_overshoot_tolerance_pct}
     -{macs_undershoot_tolerance_pct}
   - Baseline: {baseline_macs}G

2. Channel Pruning Ratio (for CNNs):
   - Value between 0.0 and 1.0 (e.g., 0.5 means 50
   - WARNING: MAC reduction is not linear with channel ratio
   - Use historical data to calibrate

3. Importance Criterion:
   - "taylor": Second-order Taylor expansion (best for ImageNet CNNs)
   - "l1norm": L1 norm-based (efficient for smaller datasets)
   - "l2norm": L2 norm-based (balanced approach)

4. Round-To: Hardware efficiency granularity (1, 2, 4, 8, 16)

CNN SAFETY LIMITS FOR IMAGENET:
- First conv layer: NEVER prune (critical for feature extraction)
- Final classifier: NEVER prune (1000 classes need full capacity)
- Bottleneck layers: Extra conservative (architectural critical points)

Output your CNN MAC allocation strategy as JSON:
{
  "importance_criterion": "YOUR_CHOICE",
  "channel_pruning_ratio": YOUR_CALCULATED_RATIO,
  "round_to": YOUR_CHOSEN_VALUE,
  "global_pruning": true,
  "baseline_macs": {baseline_macs},
  "target_macs": {target_macs},
  "expected_achieved_macs": YOUR_ESTIMATE,
  "rationale": "Explain your MAC analysis"
}
)TPL";

constexpr std::string_view kAnalysisVitText = R"TPL(You are a MAC-budget pruning strategy analyst for Vision Transformers.

CRITICAL CONSTRAINTS FOR ViT PRUNING:
- Do NOT prune QKV layers aggressively (qkv.out_features must remain >= 96)
- Attention blocks require sufficient head dimension (head_dim >= 8)
- Excessive QKV pruning (qkv_multiplier > 0.85) causes accuracy collapse

MULTIPLIER UNDERSTANDING:
- HIGHER multipliers = MORE pruning = FEWER MACs (closer to target)
- LOWER multipliers = LESS pruning = MORE MACs (farther from target)
- If achieved MACs > target MACs: INCREASE multipliers
- If achieved MACs < target MACs: DECREASE multipliers

VIT MAC SAFETY LIMITS FOR IMAGENET:
- mlp_multiplier: Maximum 0.40 (prune up to 40
- qkv_multiplier: Maximum 0.15 (prune up to 15
- proj_multiplier: Keep at 0.0 (do not prune projection layers)
- head_multiplier: Keep at 0.0 (do not prune attention heads)

ASYMMETRIC RISK STRATEGY:
MLP pruning is typically more robust than QKV pruning. If MAC budget
pressure is high, shift allocation away from QKV and into MLP.

Output your ViT MAC allocation strategy as JSON:
{
  "importance_criterion": "taylor",
  "baseline_macs": {baseline_macs},
  "target_macs": {target_macs},
  "round_to": {round_to},
  "global_pruning": true,
  "isomorphic_group_ratios": {
    "mlp_multiplier": YOUR_CALCULATED_MLP_RATIO,
    "qkv_multiplier": YOUR_CALCULATED_QKV_RATIO,
    "proj_multiplier": 0.0,
    "head_multiplier": 0.0
  },
  "rationale": "MAC safety verified with calculations"
}
)TPL";

bool ident_char(char c, bool first) {
  return (c >= 'a' && c <= 'z') || c == '_' || (!first && c >= '0' && c <= '9');
}

// Length of the identifier placeholder starting at text[i] == '{', or 0.
std::size_t placeholder_len(std::string_view text, std::size_t i) {
  std::size_t j = i + 1;
  while (j < text.size() && ident_char(text[j], j == i + 1)) ++j;
  if (j == i + 1 || j >= text.size() || text[j] != '}') return 0;
  return j - i + 1;
}

}  // namespace

std::string_view to_string(PromptTemplate t) {
  switch (t) {
    case PromptTemplate::kProfiling:
      return "profiling";
    case PromptTemplate::kMaster:
      return "master";
    case PromptTemplate::kAnalysisCnn:
      return "analysis-cnn";
    case PromptTemplate::kAnalysisVit:
      return "analysis-vit";
  }
  return "unknown";
}

std::optional<PromptTemplate> parse_prompt_template(std::string_view text) {
  for (auto t : {PromptTemplate::kProfiling, PromptTemplate::kMaster, PromptTemplate::kAnalysisCnn,
                 PromptTemplate::kAnalysisVit}) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

std::string_view template_text(PromptTemplate t) {
  switch (t) {
    case PromptTemplate::kProfiling:
      return kProfilingText;
    case PromptTemplate::kMaster:
      return kMasterText;
    case PromptTemplate::kAnalysisCnn:
      return kAnalysisCnnText;
    case PromptTemplate::kAnalysisVit:
      return kAnalysisVitText;
  }
  return {};
}

std::vector<std::string> placeholders_in(std::string_view text) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    const std::size_t len = placeholder_len(text, i);
    if (len == 0) continue;
    std::string name(text.substr(i + 1, len - 2));
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
    i += len - 1;
  }
  return names;
}

std::vector<std::string> placeholders(PromptTemplate t) { return placeholders_in(template_text(t)); }

std::string render_text(std::string_view text, const PromptContext& context) {
  std::string out;
  out.reserve(text.size() + 256);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const std::size_t len = text[i] == '{' ? placeholder_len(text, i) : 0;
    if (len == 0) {
      out.push_back(text[i]);
      continue;
    }
    const std::string name(text.substr(i + 1, len - 2));
    const auto it = context.find(name);
    if (it == context.end()) throw MissingPlaceholder(name);
    out += it->second;
    i += len - 1;
  }
  return out;
}

std::string render_prompt(PromptTemplate t, const PromptContext& context) {
  return render_text(template_text(t), context);
}

}  // namespace macprune
