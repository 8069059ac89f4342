#pragma once

#include "hgo/certify.hpp"
#include "hgo/config.hpp"
#include "hgo/dde.hpp"
#include "hgo/error.hpp"
#include "hgo/expr.hpp"
#include "hgo/harness.hpp"
#include "hgo/linalg.hpp"
#include "hgo/model.hpp"
#include "hgo/pipeline.hpp"
