#pragma once

#include "pmfvb/data.hpp"
#include "pmfvb/error.hpp"
#include "pmfvb/eval.hpp"
#include "pmfvb/io.hpp"
#include "pmfvb/model.hpp"
#include "pmfvb/parallel.hpp"
#include "pmfvb/random.hpp"
#include "pmfvb/special.hpp"
#include "pmfvb/svi.hpp"
#include "pmfvb/vb.hpp"

namespace pmfvb {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pmfvb
