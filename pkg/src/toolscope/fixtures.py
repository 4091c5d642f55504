"""Synthetic toolsets and benchmarks with known ground truth."""

from __future__ import annotations

import random

from .core import Benchmark, QueryRecord, ToolSpec, Toolset

# (three interchangeable names, parameters, description, request phrased by a user)
PLANTED_CONCEPTS: tuple[tuple[tuple[str, str, str], str, str, str], ...] = (
    (("get_user_details", "fetch_user_details", "retrieve_user_info"), "user_id: str",
     "Return the profile record of a registered user account, including email and signup date.",
     "show me the profile record and signup date of this registered user account"),
    (("calc_triangle_area", "calculate_triangle_area", "computeTriangleArea"), "base: float, height: float",
     "Compute the area of a triangle from the length of its base and its height.",
     "what is the area of a triangle with base length 3 and height 4"),
    (("send_email", "dispatch_email", "transmitEmail"), "to: str, subject: str, body: str",
     "Deliver an electronic mail message with a subject line and body to a recipient address.",
     "deliver a mail message with this subject line and body to the recipient address"),
    (("translate_text", "translateText", "text_translate"), "text: str, language: str",
     "Translate a passage of text into another natural language such as French or German.",
     "translate this passage of text into French"),
    (("delete_file", "remove_file", "eraseFile"), "path: str",
     "Permanently erase a file from the local disk given its path.",
     "permanently erase the file at this path from the disk"),
    (("create_invoice", "make_invoice", "new_invoice"), "customer_id: str, amount: float",
     "Generate a billing invoice for a customer with the amount due.",
     "generate a billing invoice for customer 7 with the amount due"),
    (("search_flights", "find_flights", "query_flights"), "origin: str, destination: str, date: str",
     "Look up available airline flights between two airports on a travel date.",
     "look up airline flights between these two airports on my travel date"),
    (("get_stock_price", "fetch_stock_price", "lookup_stock_price"), "ticker: str",
     "Report the latest trading price of a company share by its ticker symbol.",
     "what is the latest trading price of the share with ticker symbol ACME"),
    (("convert_currency", "transform_currency", "currencyConvert"), "amount: float, source: str, target: str",
     "Exchange a monetary amount from one currency to another using current rates.",
     "exchange this monetary amount from euros to another currency at current rates"),
    (("get_weather_forecast", "fetch_weather_forecast", "retrieve_weather_forecast"), "city: str, days: int",
     "Provide the multi-day weather forecast with temperatures and rain chance for a city.",
     "give me the weather forecast with rain chance for the next days in Oslo"),
    (("resize_image", "resize_img", "imageResize"), "path: str, width: int, height: int",
     "Scale a picture to new pixel dimensions while keeping its format.",
     "scale this picture to new pixel dimensions"),
    (("send_sms_message", "dispatch_sms_message", "transmitSmsMessage"), "phone: str, text: str",
     "Send a short text message to a mobile phone number.",
     "send a short text message to this mobile phone number"),
    (("calc_loan_payment", "calculate_loan_payment", "compute_loan_payment"), "principal: float, rate: float, years: int",
     "Work out the fixed monthly repayment for a loan given principal, interest rate and term.",
     "work out my monthly loan repayment for this principal and interest rate"),
    (("add_calendar_event", "insert_calendar_event", "calendarEventAdd"), "title: str, start: str, end: str",
     "Put a new appointment on the calendar between a start and end time.",
     "put a new appointment on my calendar between the start and end time"),
    (("list_support_tickets", "show_support_tickets", "supportTicketsList"), "status: str",
     "Enumerate customer support tickets filtered by their status.",
     "enumerate the customer support tickets filtered by open status"),
    (("upload_document", "put_document", "upload_doc"), "path: str, folder: str",
     "Store a document file in a shared cloud folder.",
     "store this document file in the shared cloud folder"),
    (("get_room_temp", "fetch_room_temperature", "obtain_room_temp"), "room: str",
     "Read the current indoor temperature reported by a smart thermostat in a room.",
     "read the current indoor temperature from the smart thermostat in the kitchen room"),
    (("search_recipes", "find_recipes", "query_recipes"), "ingredients: list",
     "Suggest cooking recipes that use a given list of ingredients.",
     "suggest cooking recipes that use this list of ingredients"),
    (("create_playlist", "make_playlist", "newPlaylist"), "name: str, songs: list",
     "Assemble a named music playlist from a list of songs.",
     "assemble a named music playlist from these songs"),
    (("update_shipping_address", "modify_shipping_address", "edit_shipping_address"), "order_id: str, address: str",
     "Change the delivery address on an existing customer order.",
     "change the delivery address on my existing customer order"),
)


def planted_toolset() -> Toolset:
    """60 tools: 20 concepts, each exposed under three synonymous names."""
    tools = []
    for names, params, desc, _ in PLANTED_CONCEPTS:
        for name in names:
            tools.append(ToolSpec(name=name, signature=f"{name}({params})", description=desc))
    return Toolset(tuple(tools), source_label="planted-60")


def planted_benchmark() -> Benchmark:
    """10 single-step and 10 three-step queries; gold names rotate through the variants."""
    n = len(PLANTED_CONCEPTS)
    records = []
    for q in range(10):
        names, _, _, request = PLANTED_CONCEPTS[q]
        records.append(QueryRecord(f"q{q:02d}", request, (names[q % 3],)))
    for q in range(10, 20):
        concepts = [(q + off) % n for off in (0, 7, 13)]
        steps = [PLANTED_CONCEPTS[c][3] for c in concepts]
        gold = tuple(PLANTED_CONCEPTS[c][0][(q + j) % 3] for j, c in enumerate(concepts))
        records.append(QueryRecord(f"q{q:02d}", " and then ".join(steps), gold, tuple(steps)))
    return Benchmark(tuple(records))


_VERBS = ("get", "set", "list", "create", "delete", "update", "search", "export", "import", "validate",
          "sync", "archive", "restore", "render", "schedule", "cancel", "approve", "merge", "split", "rank")
_OBJECTS = ("user", "order", "invoice", "ticket", "report", "image", "video", "playlist", "message", "event",
            "flight", "hotel", "recipe", "contract", "shipment", "sensor", "device", "budget", "survey", "course",
            "coupon", "review", "podcast", "backup", "dataset", "model", "cluster", "license", "badge", "route",
            "warehouse", "payroll", "vendor", "lead", "campaign", "patient", "prescription", "lab", "claim", "policy",
            "account", "wallet", "asset", "portfolio", "quote", "forecast", "alarm", "camera", "door", "garden")
_QUALIFIERS = ("", "batch", "remote", "draft")
_PARAM_TYPES = ("str", "int", "float", "bool", "list")
_FILLER = ("reliably", "for the current tenant", "with audit logging", "using cached data when possible",
           "and returns a status code", "respecting rate limits", "in the configured region", "for reporting")


def large_toolset(n: int = 1000, seed: int = 0) -> Toolset:
    """``n`` distinct synthetic tools with verbose docstrings."""
    rng = random.Random(seed)
    combos = [(v, o, q) for q in _QUALIFIERS for v in _VERBS for o in _OBJECTS]
    if n > len(combos):
        raise ValueError(f"at most {len(combos)} synthetic tools are available")
    tools = []
    for verb, obj, qual in combos[:n]:
        name = "_".join(p for p in (verb, qual, obj) if p)
        params = ", ".join(
            f"{obj}_{p}: {rng.choice(_PARAM_TYPES)}" for p in rng.sample(("id", "name", "limit", "owner", "tag", "date"), 3)
        )
        desc = (
            f"{verb.capitalize()} {('a ' + qual + ' ') if qual else 'a '}{obj} record {rng.choice(_FILLER)}. "
            f"Accepts the {obj} identifier and optional filters, {rng.choice(_FILLER)}, "
            f"and returns the resulting {obj} payload {rng.choice(_FILLER)}."
        )
        tools.append(ToolSpec(name=name, signature=f"{name}({params})", description=desc))
    return Toolset(tuple(tools), source_label=f"synthetic-{n}")


def large_benchmark(toolset: Toolset, n_queries: int = 50, seed: int = 0) -> Benchmark:
    rng = random.Random(seed)
    picks = rng.sample(toolset.ids, min(n_queries, len(toolset)))
    records = []
    for i, tid in enumerate(picks):
        t = toolset[tid]
        records.append(QueryRecord(f"s{i:03d}", f"please {t.description.split('.')[0].lower()}", (tid,)))
    return Benchmark(tuple(records))
