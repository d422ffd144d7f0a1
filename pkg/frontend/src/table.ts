// Result rendering: a column-labeled table from the JSON wire format, plus a
// toggle pane showing the raw payload.

export function renderResultTable(container: HTMLElement, rawJson: string): HTMLTableElement | null {
  container.replaceChildren();
  const rows = JSON.parse(rawJson) as Array<Record<string, unknown>>;
  if (rows.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-result";
    empty.textContent = "No rows.";
    container.appendChild(empty);
    return null;
  }
  const table = document.createElement("table");
  table.className = "result-table";

  const thead = document.createElement("thead");
  const headRow = document.createElement("tr");
  const columns = Object.keys(rows[0]);
  for (const column of columns) {
    const th = document.createElement("th");
    th.textContent = column;
    headRow.appendChild(th);
  }
  thead.appendChild(headRow);
  table.appendChild(thead);

  const tbody = document.createElement("tbody");
  for (const row of rows) {
    const tr = document.createElement("tr");
    for (const column of columns) {
      const td = document.createElement("td");
      td.textContent = String(row[column]);
      tr.appendChild(td);
    }
    tbody.appendChild(tr);
  }
  table.appendChild(tbody);
  container.appendChild(table);
  return table;
}

export function renderRawPane(container: HTMLElement, payload: string): void {
  let pane = container.querySelector<HTMLPreElement>(".raw-pane");
  if (!pane) {
    pane = document.createElement("pre");
    pane.className = "raw-pane";
    pane.hidden = true;
    container.appendChild(pane);
  }
  pane.textContent = payload;
}

export function toggleRawPane(container: HTMLElement): boolean {
  const pane = container.querySelector<HTMLPreElement>(".raw-pane");
  if (!pane) return false;
  pane.hidden = !pane.hidden;
  return !pane.hidden;
}
