#pragma once

#include <filesystem>

#include "fine/phantom/phantom.hpp"

namespace fine {

// A case directory holds truth.fnt, magnitude.fnt, field.fnt or kspace.fnt,
// phase.fnt (complex variant), mask/ (undersampled) and case.json.
void save_case(const PhantomCase &c, const std::filesystem::path &dir);
PhantomCase load_case(const std::filesystem::path &dir);

} // namespace fine
