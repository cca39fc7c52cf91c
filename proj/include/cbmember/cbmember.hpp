#pragma once

#include "cbmember/assignment.hpp"
#include "cbmember/control.hpp"
#include "cbmember/filter.hpp"
#include "cbmember/harness.hpp"
#include "cbmember/models.hpp"
#include "cbmember/ospa.hpp"
#include "cbmember/random.hpp"
#include "cbmember/rfs.hpp"
#include "cbmember/scenario.hpp"
#include "cbmember/truth.hpp"
