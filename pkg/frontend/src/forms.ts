// Parameter forms generated from the catalog's param schemas; the console
// never hardcodes a query's shape.

import { CatalogEntry, CatalogParam } from "./api.js";

const DATE_RE = /^\d{4}-\d{2}-\d{2}$/;

function inputFor(param: CatalogParam): HTMLInputElement {
  const input = document.createElement("input");
  input.name = param.name;
  input.dataset.kind = param.kind;
  if (param.kind === "date") {
    input.type = "date";
    input.placeholder = "YYYY-MM-DD";
  } else if (param.kind === "positive_int") {
    input.type = "number";
    input.min = "1";
  } else {
    input.type = "text";
  }
  return input;
}

export function buildForm(entry: CatalogEntry): HTMLFormElement {
  const form = document.createElement("form");
  form.className = "query-form";
  form.dataset.queryId = entry.query_id;

  for (const param of entry.params) {
    const label = document.createElement("label");
    label.textContent = param.name;
    const input = inputFor(param);
    label.appendChild(input);
    const error = document.createElement("span");
    error.className = "field-error";
    error.dataset.param = param.name;
    error.hidden = true;
    label.appendChild(error);
    form.appendChild(label);
  }

  const formatLabel = document.createElement("label");
  formatLabel.textContent = "format";
  const format = document.createElement("select");
  format.name = "__format";
  for (const value of ["json", "xml"]) {
    const option = document.createElement("option");
    option.value = value;
    option.textContent = value;
    format.appendChild(option);
  }
  formatLabel.appendChild(format);
  form.appendChild(formatLabel);

  const submit = document.createElement("button");
  submit.type = "submit";
  submit.className = "run-query";
  submit.textContent = "Run";
  form.appendChild(submit);

  const refresh = () => {
    submit.disabled = !formIsComplete(form);
  };
  form.addEventListener("input", refresh);
  refresh();
  return form;
}

export function paramInputs(form: HTMLFormElement): HTMLInputElement[] {
  return Array.from(form.querySelectorAll<HTMLInputElement>("input[name]"));
}

// submit stays disabled until every field is non-empty and passes the
// client-side format check for its kind
export function formIsComplete(form: HTMLFormElement): boolean {
  return paramInputs(form).every((input) => {
    const value = input.value.trim();
    if (value === "") return false;
    if (input.dataset.kind === "date") return DATE_RE.test(value);
    if (input.dataset.kind === "positive_int") return /^[1-9]\d*$/.test(value);
    return true;
  });
}

export function formValues(form: HTMLFormElement): Record<string, string> {
  const values: Record<string, string> = {};
  for (const input of paramInputs(form)) {
    values[input.name] = input.value.trim();
  }
  return values;
}

export function selectedFormat(form: HTMLFormElement): "json" | "xml" {
  const select = form.querySelector<HTMLSelectElement>("select[name=__format]");
  return select?.value === "xml" ? "xml" : "json";
}

export function showFieldError(form: HTMLFormElement, param: string, message: string): void {
  const slot = form.querySelector<HTMLElement>(`.field-error[data-param="${param}"]`);
  if (slot) {
    slot.textContent = message;
    slot.hidden = false;
  }
  const input = form.querySelector<HTMLInputElement>(`input[name="${param}"]`);
  input?.classList.add("blocked");
}

export function clearFieldErrors(form: HTMLFormElement): void {
  for (const slot of form.querySelectorAll<HTMLElement>(".field-error")) {
    slot.hidden = true;
    slot.textContent = "";
  }
  for (const input of paramInputs(form)) {
    input.classList.remove("blocked");
  }
}
