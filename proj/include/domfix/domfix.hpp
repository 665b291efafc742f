#pragma once

// Umbrella header: the whole library in dependency order.

#include "domfix/errors.hpp"
#include "domfix/elem.hpp"
#include "domfix/poset.hpp"
#include "domfix/domain.hpp"
#include "domfix/transform.hpp"
#include "domfix/fixpoint.hpp"
#include "domfix/laws.hpp"
#include "domfix/session.hpp"
#include "domfix/report.hpp"
#include "domfix/cli.hpp"
