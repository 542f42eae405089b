#pragma once

#include <string_view>

// Contents of data/ files, embedded at configure time (builtin_data.cpp.in).
namespace causalkg::builtin {

extern const std::string_view kContractionsJson;
extern const std::string_view kRelationLexicon;

}  // namespace causalkg::builtin
