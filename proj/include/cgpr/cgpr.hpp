#pragma once

#include "cgpr/errors.hpp"
#include "cgpr/dataset.hpp"
#include "cgpr/kernel.hpp"
#include "cgpr/qp.hpp"
#include "cgpr/polymean.hpp"
#include "cgpr/normal.hpp"
#include "cgpr/cobyla.hpp"
#include "cgpr/gp.hpp"
#include "cgpr/constraints.hpp"
#include "cgpr/kcc.hpp"
#include "cgpr/metrics.hpp"
#include "cgpr/io.hpp"
#include "cgpr/commands.hpp"
