#include <algorithm>
#include <array>

#include "synprobe/outcomes.hpp"

namespace synprobe {

namespace {

constexpr std::array<ParadigmInfo, 67> kParadigms{{
    {"anaphor_gender_agreement", "anaphor_agreement"},
    {"anaphor_number_agreement", "anaphor_agreement"},
    {"causative", "argument_structure"},
    {"drop_argument", "argument_structure"},
    {"inchoative", "argument_structure"},
    {"intransitive", "argument_structure"},
    {"passive_1", "argument_structure"},
    {"passive_2", "argument_structure"},
    {"transitive", "argument_structure"},
    {"principle_A_c_command", "binding"},
    {"principle_A_case_1", "binding"},
    {"principle_A_case_2", "binding"},
    {"principle_A_domain_1", "binding"},
    {"principle_A_domain_2", "binding"},
    {"principle_A_domain_3", "binding"},
    {"principle_A_reconstruction", "binding"},
    {"existential_there_object_raising", "control_raising"},
    {"existential_there_subject_raising", "control_raising"},
    {"expletive_it_object_raising", "control_raising"},
    {"tough_vs_raising_1", "control_raising"},
    {"tough_vs_raising_2", "control_raising"},
    {"determiner_noun_agreement_1", "determiner_noun_agreement"},
    {"determiner_noun_agreement_2", "determiner_noun_agreement"},
    {"determiner_noun_agreement_irregular_1", "determiner_noun_agreement"},
    {"determiner_noun_agreement_irregular_2", "determiner_noun_agreement"},
    {"determiner_noun_agreement_with_adj_2", "determiner_noun_agreement"},
    {"determiner_noun_agreement_with_adj_irregular_1", "determiner_noun_agreement"},
    {"determiner_noun_agreement_with_adj_irregular_2", "determiner_noun_agreement"},
    {"determiner_noun_agreement_with_adjective_1", "determiner_noun_agreement"},
    {"ellipsis_n_bar_1", "ellipsis"},
    {"ellipsis_n_bar_2", "ellipsis"},
    {"wh_questions_object_gap", "filler_gap_dependency"},
    {"wh_questions_subject_gap", "filler_gap_dependency"},
    {"wh_questions_subject_gap_long_distance", "filler_gap_dependency"},
    {"wh_vs_that_no_gap", "filler_gap_dependency"},
    {"wh_vs_that_no_gap_long_distance", "filler_gap_dependency"},
    {"wh_vs_that_with_gap", "filler_gap_dependency"},
    {"wh_vs_that_with_gap_long_distance", "filler_gap_dependency"},
    {"irregular_past_participle_adjectives", "irregular_forms"},
    {"irregular_past_participle_verbs", "irregular_forms"},
    {"adjunct_island", "island_effects"},
    {"complex_NP_island", "island_effects"},
    {"coordinate_structure_constraint_complex_left_branch", "island_effects"},
    {"coordinate_structure_constraint_object_extraction", "island_effects"},
    {"left_branch_island_echo_question", "island_effects"},
    {"left_branch_island_simple_question", "island_effects"},
    {"sentential_subject_island", "island_effects"},
    {"wh_island", "island_effects"},
    {"matrix_question_npi_licensor_present", "npi_licensing"},
    {"npi_present_1", "npi_licensing"},
    {"npi_present_2", "npi_licensing"},
    {"only_npi_licensor_present", "npi_licensing"},
    {"only_npi_scope", "npi_licensing"},
    {"sentential_negation_npi_licensor_present", "npi_licensing"},
    {"sentential_negation_npi_scope", "npi_licensing"},
    {"existential_there_quantifiers_1", "quantifiers"},
    {"existential_there_quantifiers_2", "quantifiers"},
    {"superlative_quantifiers_1", "quantifiers"},
    {"superlative_quantifiers_2", "quantifiers"},
    {"animate_subject_passive", "s-selection"},
    {"animate_subject_trans", "s-selection"},
    {"distractor_agreement_relational_noun", "subject_verb_agreement"},
    {"distractor_agreement_relative_clause", "subject_verb_agreement"},
    {"irregular_plural_subject_verb_agreement_1", "subject_verb_agreement"},
    {"irregular_plural_subject_verb_agreement_2", "subject_verb_agreement"},
    {"regular_plural_subject_verb_agreement_1", "subject_verb_agreement"},
    {"regular_plural_subject_verb_agreement_2", "subject_verb_agreement"},
}};

constexpr std::array<std::string_view, 4> kCriticalParadigms{
    "distractor_agreement_relational_noun",
    "distractor_agreement_relative_clause",
    "wh_vs_that_with_gap",
    "wh_vs_that_with_gap_long_distance",
};

}  // namespace

std::span<const ParadigmInfo> paradigm_table() { return kParadigms; }

std::optional<std::string_view> phenomenon_of(std::string_view uid) {
  for (const auto& p : kParadigms) {
    if (p.uid == uid) return p.phenomenon;
  }
  return std::nullopt;
}

std::vector<std::string> phenomena() {
  std::vector<std::string> out;
  for (const auto& p : kParadigms) {
    if (std::find(out.begin(), out.end(), p.phenomenon) == out.end()) out.emplace_back(p.phenomenon);
  }
  return out;
}

std::span<const std::string_view> critical_paradigms() { return kCriticalParadigms; }

}  // namespace synprobe
