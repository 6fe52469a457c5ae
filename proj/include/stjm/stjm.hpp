#pragma once

#include "stjm/decode.hpp"
#include "stjm/error.hpp"
#include "stjm/eval.hpp"
#include "stjm/fit.hpp"
#include "stjm/gower.hpp"
#include "stjm/io.hpp"
#include "stjm/objective.hpp"
#include "stjm/panel.hpp"
#include "stjm/report.hpp"
#include "stjm/simgen.hpp"
#include "stjm/spatial.hpp"
