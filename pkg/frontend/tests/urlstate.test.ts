import { describe, expect, it } from "vitest";

import { decodeState, encodeState } from "../src/urlstate.js";
import { initialState, type UiState } from "../src/types.js";

function randomState(seed: number): UiState {
  // mulberry32: deterministic tiny PRNG, plenty for state shapes
  let a = seed >>> 0;
  const rand = () => {
    a |= 0; a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
  const pick = <T,>(xs: T[]): T => xs[Math.floor(rand() * xs.length)];
  const queries = ["", "Zika virus", 'species:"Homo sapiens" AND asthma', "a&b=c", "ünïcode täxt", "x:y"];
  const fields = ["species.label", "conditionsOfAccess", "includedInDataCatalog.name"];
  const values = ["Homo sapiens", "Open", "Data, Inc", "NICHD Data and Specimen Hub (DASH)", "a=b&c"];
  const state = initialState();
  state.query = pick(queries);
  state.mode = rand() < 0.3 ? "advanced" : "basic";
  const filterCount = Math.floor(rand() * 4);
  for (let i = 0; i < filterCount; i += 1) {
    state.filters.push({ field: pick(fields), value: pick(values) });
  }
  state.page = Math.floor(rand() * 5);
  state.pageSize = pick([10, 10, 25]);
  state.detail = rand() < 0.2 ? "massive_MSV000090001" : null;
  return state;
}

describe("url state codec", () => {
  it("encodes defaults to an empty string", () => {
    expect(encodeState(initialState())).toBe("");
  });

  it("round-trips a representative state", () => {
    const state: UiState = {
      query: "Zika virus",
      mode: "basic",
      filters: [
        { field: "species.label", value: "Homo sapiens" },
        { field: "measurementTechnique.label", value: "Proteomics" },
      ],
      page: 2,
      pageSize: 10,
      detail: null,
    };
    expect(decodeState(encodeState(state))).toEqual(state);
  });

  it("keeps filter order (append order is the UI click order)", () => {
    const state = initialState();
    state.filters = [
      { field: "conditionsOfAccess", value: "Open" },
      { field: "species.label", value: "Mus musculus" },
      { field: "conditionsOfAccess", value: "Registered" },
    ];
    expect(decodeState(encodeState(state)).filters).toEqual(state.filters);
  });

  it("survives values containing separators and unicode", () => {
    const state = initialState();
    state.query = "a&b=c:d";
    state.filters = [{ field: "includedInDataCatalog.name", value: "Data, Inc: très spécial" }];
    expect(decodeState(encodeState(state))).toEqual(state);
  });

  it("round-trips 300 random states", () => {
    for (let seed = 0; seed < 300; seed += 1) {
      const state = randomState(seed);
      expect(decodeState(encodeState(state))).toEqual(state);
    }
  });

  it("ignores malformed page and filter params", () => {
    const state = decodeState("page=-3&f=novalue&f=:missingfield&size=0");
    expect(state.page).toBe(0);
    expect(state.filters).toEqual([]);
    expect(state.pageSize).toBe(10);
  });
});
