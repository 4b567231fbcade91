#pragma once

#define VAPROTO_VERSION "0.1.0"
